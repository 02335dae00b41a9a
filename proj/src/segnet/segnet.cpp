#include "hitop/segnet/segnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>
#if defined(__SSE__)
#include <xmmintrin.h>
#endif
#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hitop/common/error.hpp"
#include "hitop/dataset/dataset.hpp"

namespace hitop::segnet {

using FMatrix = Network<float>::Matrix;

SegModel::SegModel(const SegModelConfig& config, std::uint64_t seed) : net_(config, seed), seed_(seed) {}
SegModel::SegModel(Network<float> network, std::uint64_t seed) : net_(std::move(network)), seed_(seed) {}

std::string SegModel::id() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : net_.parameters()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(p.size()) * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SegModel init_model(const SegModelConfig& config, std::uint64_t seed) {
  config.validate();
  return SegModel(config, seed);
}

int frame_extent(int n, int min_border, int multiple) {
  if (n < 1 || min_border < 0 || multiple < 1) throw ContractError("frame_extent: bad arguments");
  const int need = n + 2 * min_border;
  return (need + multiple - 1) / multiple * multiple;
}

FramePadding frame_padding(int rows, int cols, int frame_rows, int frame_cols, int min_border) {
  const int sr = frame_rows - rows, sc = frame_cols - cols;
  if (sr < 2 * min_border || sc < 2 * min_border)
    throw ContractError("image " + std::to_string(rows) + "x" + std::to_string(cols) + " does not fit a " +
                        std::to_string(frame_rows) + "x" + std::to_string(frame_cols) + " frame with a " +
                        std::to_string(min_border) + " px border");
  return {sr / 2, sc / 2, sr - sr / 2, sc - sc / 2};
}

SegModelConfig desk_config_for(int rows, int cols, int min_border) {
  return SegModelConfig::desk(frame_extent(rows, min_border), frame_extent(cols, min_border));
}

namespace {

FMatrix to_matrix(const Grid<float>& g) {
  FMatrix m(1, static_cast<Eigen::Index>(g.size()));
  std::copy(g.values().begin(), g.values().end(), m.data());
  return m;
}

// Mask embedded in the model frame as a 1 x HW row.
FMatrix embed(const Mask& m, const FramePadding& pad, int frame_rows, int frame_cols) {
  FMatrix out = FMatrix::Zero(1, static_cast<Eigen::Index>(frame_rows) * frame_cols);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      if (m(r, c)) out(0, static_cast<Eigen::Index>(r + pad.top) * frame_cols + c + pad.left) = 1.0f;
  return out;
}

// Vanishing gradients late in training are otherwise denormal and slow.
class FlushDenormals {
 public:
#if defined(__SSE__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

// im2col buffers are large enough to be mmap'ed and unmapped on every call.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 1024 << 20);
    return true;
  }();
  (void)done;
#endif
}

struct Prepared {
  std::vector<FMatrix> inputs;
  std::vector<FMatrix> targets;
};

Prepared prepare(const std::vector<TrainingPair>& pairs, const SegModelConfig& config, int min_border) {
  Prepared p;
  p.inputs.reserve(pairs.size());
  p.targets.reserve(pairs.size());
  for (const auto& pair : pairs) {
    if (!pair.topology.same_shape(pair.mask)) throw ContractError("topology and mask dimensions differ");
    const auto pad = frame_padding(pair.topology.rows(), pair.topology.cols(), config.height, config.width, min_border);
    p.inputs.push_back(embed(pair.topology, pad, config.height, config.width));
    p.targets.push_back(embed(pair.mask, pad, config.height, config.width));
  }
  return p;
}

double mean_loss(const Network<float>& net, const Prepared& data) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    const FMatrix z = net.forward(data.inputs[i], false);
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
      const double zi = z(0, k), yi = data.targets[i](0, k);
      total += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
    }
    count += static_cast<std::size_t>(z.cols());
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

Grid<float> forward(const SegModel& model, const Grid<float>& frame_image) {
  const auto& cfg = model.config();
  if (frame_image.rows() != cfg.height || frame_image.cols() != cfg.width)
    throw ContractError("image " + std::to_string(frame_image.rows()) + "x" + std::to_string(frame_image.cols()) +
                        " does not match model input " + std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
  const FMatrix z = model.network().forward(to_matrix(frame_image), false);
  return Grid<float>(cfg.height, cfg.width, std::vector<float>(z.data(), z.data() + z.size()));
}

Grid<double> predict(const SegModel& model, const Grid<float>& frame_image) {
  const Grid<float> z = forward(model, frame_image);
  Grid<double> p(z.rows(), z.cols());
  const double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    const double s = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
    p[i] = std::clamp(s, lo, hi);
  }
  return p;
}

Grid<double> predict_image(const SegModel& model, const Mask& topology, int min_border) {
  const auto& cfg = model.config();
  const auto pad = frame_padding(topology.rows(), topology.cols(), cfg.height, cfg.width, min_border);
  Grid<float> frame(cfg.height, cfg.width, 0.0f);
  for (int r = 0; r < topology.rows(); ++r)
    for (int c = 0; c < topology.cols(); ++c) frame(r + pad.top, c + pad.left) = topology(r, c) ? 1.0f : 0.0f;
  const Grid<double> full = predict(model, frame);
  Grid<double> out(topology.rows(), topology.cols());
  for (int r = 0; r < topology.rows(); ++r)
    for (int c = 0; c < topology.cols(); ++c) out(r, c) = full(r + pad.top, c + pad.left);
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (min_delta < 0.0) throw ConfigError("min_delta must be >= 0");
  if (min_border < 0) throw ConfigError("min_border must be >= 0");
}

double evaluate_loss(const SegModel& model, const std::vector<TrainingPair>& pairs, int min_border) {
  return mean_loss(model.network(), prepare(pairs, model.config(), min_border));
}

TrainResult train(const SegModel& initial, const std::vector<TrainingPair>& train_pairs,
                  const std::vector<TrainingPair>& val_pairs, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const FlushDenormals ftz;
  keep_large_blocks_on_heap();
  if (train_pairs.empty() || val_pairs.empty()) throw ContractError("training needs non-empty train and val splits");
  const Prepared tr = prepare(train_pairs, initial.config(), config.min_border);
  const Prepared va = prepare(val_pairs, initial.config(), config.min_border);

  Network<float> net = initial.network();
  auto& params = net.parameters();
  std::vector<FMatrix> m1 = net.zero_gradients(), m2 = net.zero_gradients();
  std::mt19937_64 order_rng(config.seed);
  std::mt19937_64 drop_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;  // m1 / m2 below use the same rates in float
  long step = 0;

  TrainResult result{initial, {}, 0, 0, false};
  double best = std::numeric_limits<double>::infinity();
  double reference = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(tr.inputs.size());
  const double pixels = static_cast<double>(initial.config().height) * initial.config().width;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double n = static_cast<double>(end - start);
      auto grads = net.zero_gradients();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k)
        batch_loss += net.accumulate_gradient(tr.inputs[order[k]], tr.targets[order[k]],
                                              static_cast<float>(1.0 / (n * pixels)), true, &drop_rng, grads);
      if (!std::isfinite(batch_loss)) throw TrainingError(epoch, "training loss is not finite");
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      const float lr_t = static_cast<float>(config.learning_rate * std::sqrt(c2) / c1);
      const float eps_t = static_cast<float>(eps * std::sqrt(c2));
      for (std::size_t i = 0; i < params.size(); ++i) {
        m1[i] = 0.9f * m1[i] + 0.1f * grads[i];
        m2[i] = 0.999f * m2[i] + 0.001f * grads[i].cwiseProduct(grads[i]);
        params[i].array() -= lr_t * m1[i].array() / (m2[i].array().sqrt() + eps_t);
      }
      epoch_loss += batch_loss;
    }
    const double train_loss = epoch_loss / (static_cast<double>(order.size()) * pixels);
    const double val_loss = mean_loss(net, va);
    if (!std::isfinite(val_loss)) throw TrainingError(epoch, "validation loss is not finite");
    const EpochRecord rec{epoch, train_loss, val_loss};
    result.history.push_back(rec);
    spdlog::debug("epoch {} train {:.5f} val {:.5f}", epoch, train_loss, val_loss);
    const bool keep_going = !on_epoch || on_epoch(rec);

    if (val_loss < best) {
      best = val_loss;
      result.best_epoch = epoch;
      result.model = SegModel(net, initial.seed());
    }
    if (val_loss < reference - config.min_delta) {
      reference = val_loss;
      result.last_improvement_epoch = epoch;
    } else if (epoch - result.last_improvement_epoch >= config.patience) {
      result.stopped_early = true;
      break;
    }
    if (!keep_going) break;
  }
  result.model.epoch = result.best_epoch;
  result.model.image_rows = train_pairs.front().topology.rows();
  result.model.image_cols = train_pairs.front().topology.cols();
  result.model.val_loss = best;
  result.model.history = result.history;
  return result;
}

TrainResult train_on_corpus(const SegModel& initial, const std::filesystem::path& corpus_dir, const TrainConfig& config,
                            const EpochCallback& on_epoch) {
  const auto manifest = dataset::load_manifest(corpus_dir);
  std::vector<TrainingPair> tr, va;
  for (const auto& rec : manifest.samples) {
    if (rec.split == dataset::Split::Test) continue;
    auto pair = dataset::load_pair(corpus_dir, rec);
    (rec.split == dataset::Split::Train ? tr : va).push_back({std::move(pair.topology), std::move(pair.mask)});
  }
  spdlog::info("training on {} pairs, validating on {}", tr.size(), va.size());
  return train(initial, tr, va, config, on_epoch);
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "epoch,train_loss,val_loss\n";
  out.precision(9);
  for (const auto& r : history) out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << '\n';
}

// ---------------------------------------------------------------- weight files

namespace {

constexpr char kMagic[5] = {'H', 'S', 'E', 'G', '1'};
constexpr int kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

void save_weights(const SegModel& model, const std::filesystem::path& path) {
  const auto layout = parameter_layout(model.config());
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : layout) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
  const nlohmann::json header = {{"format", kFormatVersion}, {"config", model.config().to_json()},
                                 {"seed", model.seed()},     {"epoch", model.epoch},
                                 {"val_loss", model.val_loss}, {"image", {model.image_rows, model.image_cols}},
                                 {"tensors", tensors}};
  const std::string text = header.dump();
  std::string blob(kMagic, sizeof kMagic);
  put_u32(blob, static_cast<std::uint32_t>(text.size()));
  blob += text;
  for (const auto& p : model.network().parameters())
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      std::uint32_t bits;
      const float v = p.data()[i];
      std::memcpy(&bits, &v, sizeof bits);
      put_u32(blob, bits);
    }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw Error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

SegModel load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  if (blob.size() < sizeof kMagic + 4 || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0)
    throw LoadError(path.string() + ": not an HSEG1 weight file");
  const std::size_t hlen = get_u32(bytes + sizeof kMagic);
  const std::size_t data_start = sizeof kMagic + 4 + hlen;
  if (blob.size() < data_start) throw LoadError(path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(sizeof kMagic + 4, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": bad header: " + e.what());
  }
  if (header.value("format", 0) != kFormatVersion)
    throw LoadError(path.string() + ": unsupported format version " + header.value("format", nlohmann::json()).dump());
  SegModelConfig config;
  try {
    config = SegModelConfig::from_json(header.at("config"));
  } catch (const std::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  const auto layout = parameter_layout(config);
  const auto& stored = header.value("tensors", nlohmann::json::array());
  if (stored.size() != layout.size()) throw ShapeError(path.string() + ": tensor count does not match the configuration");
  std::size_t total = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (stored[i].value("name", "") != layout[i].name || stored[i].value("shape", std::vector<int>{}) != layout[i].shape)
      throw ShapeError(path.string() + ": tensor " + layout[i].name + " does not match the configuration");
    total += layout[i].size();
  }
  if (blob.size() != data_start + 4 * total)
    throw LoadError(path.string() + ": expected " + std::to_string(4 * total) + " data bytes, found " +
                    std::to_string(blob.size() - data_start));

  Network<float> net(config, 0);
  const unsigned char* p = bytes + data_start;
  for (auto& t : net.parameters())
    for (Eigen::Index i = 0; i < t.size(); ++i, p += 4) {
      const std::uint32_t bits = get_u32(p);
      float v;
      std::memcpy(&v, &bits, sizeof v);
      t.data()[i] = v;
    }
  SegModel model(std::move(net), header.value("seed", std::uint64_t{0}));
  model.epoch = header.value("epoch", 0);
  model.val_loss = header.value("val_loss", 0.0);
  if (header.contains("image") && header["image"].is_array() && header["image"].size() == 2) {
    model.image_rows = header["image"][0].get<int>();
    model.image_cols = header["image"][1].get<int>();
  }
  return model;
}

SegModel load_weights(const std::filesystem::path& path, const SegModelConfig& expected) {
  SegModel model = load_weights(path);
  if (!(model.config() == expected))
    throw ShapeError(path.string() + ": stored model is " + model.config().to_json().dump() + ", expected " +
                     expected.to_json().dump());
  return model;
}

}  // namespace hitop::segnet
