#include "hitop/segnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hitop/common/error.hpp"

namespace hitop::segnet {

SegModelConfig SegModelConfig::desk(int height, int width) {
  SegModelConfig c;
  c.height = height;
  c.width = width;
  c.widths = {16, 32, 64};
  c.bottleneck = 128;
  return c;
}

void SegModelConfig::validate() const {
  if (widths.empty()) throw ConfigError("model needs at least one encoder level");
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  for (int w : widths)
    if (w < 1) throw ConfigError("channel widths must be >= 1");
  if (bottleneck < 1) throw ConfigError("bottleneck width must be >= 1");
  const int div = 1 << depth();
  if (height < div || width < div || height % div != 0 || width % div != 0)
    throw ConfigError("input " + std::to_string(height) + "x" + std::to_string(width) + " is not divisible by " +
                      std::to_string(div));
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0,1)");
}

nlohmann::json SegModelConfig::to_json() const {
  return {{"height", height}, {"width", width},           {"in_channels", in_channels},
          {"widths", widths}, {"bottleneck", bottleneck}, {"dropout", dropout}};
}

SegModelConfig SegModelConfig::from_json(const nlohmann::json& doc) {
  SegModelConfig c;
  try {
    c.height = doc.at("height").get<int>();
    c.width = doc.at("width").get<int>();
    c.in_channels = doc.value("in_channels", 1);
    c.widths = doc.at("widths").get<std::vector<int>>();
    c.bottleneck = doc.at("bottleneck").get<int>();
    c.dropout = doc.value("dropout", 0.15);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::size_t TensorInfo::size() const {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

std::vector<TensorInfo> parameter_layout(const SegModelConfig& config) {
  config.validate();
  std::vector<TensorInfo> out;
  auto conv = [&](const std::string& name, int cin, int cout, int k) {
    out.push_back({name + ".weight", {cout, cin, k, k}});
    out.push_back({name + ".bias", {cout}});
  };
  const int L = config.depth();
  int cin = config.in_channels;
  for (int l = 0; l < L; ++l) {
    const std::string p = "enc" + std::to_string(l);
    conv(p + ".conv1", cin, config.widths[l], 3);
    conv(p + ".conv2", config.widths[l], config.widths[l], 3);
    cin = config.widths[l];
  }
  conv("bottleneck.conv1", cin, config.bottleneck, 3);
  conv("bottleneck.conv2", config.bottleneck, config.bottleneck, 3);
  int below = config.bottleneck;
  for (int l = L - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    const int w = config.widths[l];
    out.push_back({p + ".up.weight", {below, w, 2, 2}});
    out.push_back({p + ".up.bias", {w}});
    conv(p + ".conv1", 2 * w, w, 3);
    conv(p + ".conv2", w, w, 3);
    below = w;
  }
  conv("head", config.widths[0], 1, 1);
  return out;
}

double bce_with_logits(const Eigen::Ref<const Eigen::ArrayXd>& z, const Eigen::Ref<const Eigen::ArrayXd>& y) {
  if (z.size() != y.size() || z.size() == 0) throw ContractError("bce: size mismatch or empty input");
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  return s / static_cast<double>(z.size());
}

namespace {

template <typename S>
using Mat = typename Network<S>::Matrix;

// 3x3 same-padded patches: row ci*9 + ky*3 + kx, column y*w + x.
template <typename S>
Mat<S> im2col3(const Mat<S>& x, int h, int w) {
  const int c = static_cast<int>(x.rows());
  Mat<S> col(c * 9, static_cast<Eigen::Index>(h) * w);
  for (int ci = 0; ci < c; ++ci) {
    const S* src = x.row(ci).data();
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        S* dst = col.row(ci * 9 + ky * 3 + kx).data();
        const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
        for (int y = 0; y < h; ++y) {
          S* d = dst + static_cast<std::size_t>(y) * w;
          const int yy = y + ky - 1;
          if (yy < 0 || yy >= h) {
            std::fill(d, d + w, S(0));
            continue;
          }
          const S* s = src + static_cast<std::size_t>(yy) * w + (kx - 1);
          for (int xx = 0; xx < x0; ++xx) d[xx] = S(0);
          std::copy(s + x0, s + x1, d + x0);
          for (int xx = x1; xx < w; ++xx) d[xx] = S(0);
        }
      }
  }
  return col;
}

template <typename S>
Mat<S> col2im3(const Mat<S>& col, int c, int h, int w) {
  Mat<S> x = Mat<S>::Zero(c, static_cast<Eigen::Index>(h) * w);
  for (int ci = 0; ci < c; ++ci) {
    S* dst = x.row(ci).data();
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const S* src = col.row(ci * 9 + ky * 3 + kx).data();
        const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
        for (int y = 0; y < h; ++y) {
          const int yy = y + ky - 1;
          if (yy < 0 || yy >= h) continue;
          const S* s = src + static_cast<std::size_t>(y) * w;
          S* d = dst + static_cast<std::size_t>(yy) * w + (kx - 1);
          for (int xx = x0; xx < x1; ++xx) d[xx] += s[xx];
        }
      }
  }
  return x;
}

template <typename S>
Mat<S> conv3(const Mat<S>& x, const Mat<S>& weight, const Mat<S>& bias, int h, int w) {
  Mat<S> y = weight * im2col3<S>(x, h, w);
  for (Eigen::Index r = 0; r < y.rows(); ++r) y.row(r).array() += bias(r, 0);
  return y;
}

// Returns dX; accumulates dW and db.
template <typename S>
Mat<S> conv3_backward(const Mat<S>& x, const Mat<S>& weight, const Mat<S>& dy, int h, int w, Mat<S>& dw, Mat<S>& db,
                      bool need_dx) {
  const Mat<S> col = im2col3<S>(x, h, w);
  dw.noalias() += dy * col.transpose();
  db += dy.rowwise().sum();
  if (!need_dx) return {};
  return col2im3<S>(weight.transpose() * dy, static_cast<int>(x.rows()), h, w);
}

template <typename S>
void relu_inplace(Mat<S>& m) {
  m = m.cwiseMax(S(0));
}

template <typename S>
void relu_backward(Mat<S>& grad, const Mat<S>& activated) {
  grad.array() *= (activated.array() > S(0)).template cast<S>();
}

template <typename S>
Mat<S> maxpool(const Mat<S>& x, int h, int w, std::vector<int>& argmax) {
  const int oh = h / 2, ow = w / 2;
  Mat<S> y(x.rows(), static_cast<Eigen::Index>(oh) * ow);
  argmax.resize(static_cast<std::size_t>(y.size()));
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const S* src = x.row(c).data();
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        int best = (2 * i) * w + 2 * j;
        for (int k : {(2 * i) * w + 2 * j + 1, (2 * i + 1) * w + 2 * j, (2 * i + 1) * w + 2 * j + 1})
          if (src[k] > src[best]) best = k;
        y(c, i * ow + j) = src[best];
        argmax[static_cast<std::size_t>(c) * oh * ow + i * ow + j] = best;
      }
  }
  return y;
}

template <typename S>
Mat<S> maxpool_backward(const Mat<S>& dy, const std::vector<int>& argmax, int h, int w) {
  Mat<S> dx = Mat<S>::Zero(dy.rows(), static_cast<Eigen::Index>(h) * w);
  const Eigen::Index n = dy.cols();
  for (Eigen::Index c = 0; c < dy.rows(); ++c)
    for (Eigen::Index k = 0; k < n; ++k) dx(c, argmax[static_cast<std::size_t>(c * n + k)]) += dy(c, k);
  return dx;
}

// Stride-2 2x2 transposed conv from h x w to 2h x 2w. weight is cin x (cout*4).
template <typename S>
Mat<S> upconv(const Mat<S>& x, const Mat<S>& weight, const Mat<S>& bias, int h, int w) {
  const Eigen::Index cout = bias.rows();
  const Mat<S> t = weight.transpose() * x;
  Mat<S> y(cout, static_cast<Eigen::Index>(4) * h * w);
  const int ow = 2 * w;
  for (Eigen::Index co = 0; co < cout; ++co)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const S* src = t.row(co * 4 + dy * 2 + dx).data();
        S* dst = y.row(co).data();
        const S b = bias(co, 0);
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) dst[(2 * i + dy) * ow + 2 * j + dx] = src[i * w + j] + b;
      }
  return y;
}

template <typename S>
Mat<S> upconv_backward(const Mat<S>& x, const Mat<S>& weight, const Mat<S>& dy, int h, int w, Mat<S>& dw, Mat<S>& db) {
  const Eigen::Index cout = dy.rows();
  Mat<S> dt(cout * 4, static_cast<Eigen::Index>(h) * w);
  const int ow = 2 * w;
  for (Eigen::Index co = 0; co < cout; ++co)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        S* dst = dt.row(co * 4 + a * 2 + b).data();
        const S* src = dy.row(co).data();
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) dst[i * w + j] = src[(2 * i + a) * ow + 2 * j + b];
      }
  dw.noalias() += x * dt.transpose();
  db += dy.rowwise().sum();
  return weight * dt;
}

template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
  Mat<S> m(rows, cols);
  const S keep = S(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m.data()[i] = u < p ? S(0) : keep;
  }
  return m;
}

double standard_normal(std::mt19937_64& rng) {
  // Box-Muller on 53-bit uniforms so the stream is identical across standard libraries.
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

template <typename S>
struct Network<S>::Trace {
  struct Level {
    Matrix in, a, b;  // conv1 input, conv1 output, conv2 output
  };
  std::vector<Level> enc;
  std::vector<std::vector<int>> pool_idx;
  std::vector<Matrix> drop;  // dropout masks, one per pooled level plus bottleneck
  Level mid;
  std::vector<Level> dec;  // indexed by level; `in` is the concatenation
  std::vector<Matrix> up_in;
  Matrix head_in;
};

template <typename S>
Network<S>::Network(const SegModelConfig& config, std::uint64_t seed) : config_(config) {
  const auto layout = parameter_layout(config_);
  std::mt19937_64 rng(seed);
  params_.reserve(layout.size());
  for (const auto& t : layout) {
    const bool bias = t.shape.size() == 1;
    if (bias) {
      params_.push_back(Matrix::Zero(t.shape[0], 1));
      continue;
    }
    const bool up = t.name.find(".up.") != std::string::npos;
    const bool head = t.name.rfind("head", 0) == 0;
    const int rows = t.shape[0];
    const int cols = static_cast<int>(t.size() / static_cast<std::size_t>(rows));
    const double fan_in = up ? static_cast<double>(t.shape[0]) : static_cast<double>(t.shape[1]) * t.shape[2] * t.shape[3];
    const double stddev = std::sqrt((head ? 1.0 : 2.0) / fan_in);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(stddev * standard_normal(rng));
    params_.push_back(std::move(m));
  }
}

template <typename S>
std::size_t Network<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.size());
  return n;
}

template <typename S>
std::vector<typename Network<S>::Matrix> Network<S>::zero_gradients() const {
  std::vector<Matrix> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Matrix::Zero(p.rows(), p.cols()));
  return g;
}

template <typename S>
typename Network<S>::Matrix Network<S>::run(const Matrix& image, bool training, std::mt19937_64* rng, Trace* tr) const {
  const int L = config_.depth();
  const int H = config_.height, W = config_.width;
  if (image.rows() != config_.in_channels || image.cols() != static_cast<Eigen::Index>(H) * W)
    throw ContractError("input is " + std::to_string(image.rows()) + "x" + std::to_string(image.cols()) +
                        ", model expects " + std::to_string(config_.in_channels) + "x" + std::to_string(H * W));
  const bool drop = training && config_.dropout > 0.0;
  if (drop && rng == nullptr) throw ContractError("training forward needs a random generator");
  auto P = [&](int i) -> const Matrix& { return params_[static_cast<std::size_t>(i)]; };
  auto apply_dropout = [&](Matrix& x) {
    if (!drop) return;
    Matrix m = dropout_mask<S>(x.rows(), x.cols(), config_.dropout, *rng);
    x.array() *= m.array();
    if (tr) tr->drop.push_back(std::move(m));
  };
  if (tr) {
    tr->enc.resize(L);
    tr->pool_idx.resize(L);
    tr->dec.resize(L);
    tr->up_in.resize(L);
    tr->drop.clear();
  }

  Matrix x = image;
  std::vector<Matrix> skips(L);
  for (int l = 0; l < L; ++l) {
    const int h = H >> l, w = W >> l;
    Matrix a = conv3<S>(x, P(4 * l), P(4 * l + 1), h, w);
    relu_inplace<S>(a);
    Matrix b = conv3<S>(a, P(4 * l + 2), P(4 * l + 3), h, w);
    relu_inplace<S>(b);
    std::vector<int> idx;
    Matrix pooled = maxpool<S>(b, h, w, idx);
    apply_dropout(pooled);
    if (tr) {
      tr->enc[l] = {std::move(x), std::move(a), b};
      tr->pool_idx[l] = std::move(idx);
    }
    skips[l] = std::move(b);
    x = std::move(pooled);
  }
  const int mb = 4 * L;
  {
    const int h = H >> L, w = W >> L;
    Matrix a = conv3<S>(x, P(mb), P(mb + 1), h, w);
    relu_inplace<S>(a);
    Matrix b = conv3<S>(a, P(mb + 2), P(mb + 3), h, w);
    relu_inplace<S>(b);
    if (tr) tr->mid = {std::move(x), std::move(a), b};
    apply_dropout(b);
    x = std::move(b);
  }
  for (int l = L - 1; l >= 0; --l) {
    const int base = mb + 4 + 6 * (L - 1 - l);
    const int h = H >> l, w = W >> l;
    Matrix u = upconv<S>(x, P(base), P(base + 1), h / 2, w / 2);
    if (tr) tr->up_in[l] = std::move(x);
    Matrix cat(u.rows() + skips[l].rows(), u.cols());
    cat << u, skips[l];
    Matrix a = conv3<S>(cat, P(base + 2), P(base + 3), h, w);
    relu_inplace<S>(a);
    Matrix b = conv3<S>(a, P(base + 4), P(base + 5), h, w);
    relu_inplace<S>(b);
    if (tr) tr->dec[l] = {std::move(cat), std::move(a), b};
    x = std::move(b);
  }
  const int hb = mb + 4 + 6 * L;
  Matrix logits = P(hb) * x;
  logits.array() += P(hb + 1)(0, 0);
  if (tr) tr->head_in = std::move(x);
  return logits;
}

template <typename S>
typename Network<S>::Matrix Network<S>::forward(const Matrix& image, bool training, std::mt19937_64* rng) const {
  return run(image, training, rng, nullptr);
}

template <typename S>
double Network<S>::accumulate_gradient(const Matrix& image, const Matrix& target, S scale, bool training,
                                       std::mt19937_64* rng, std::vector<Matrix>& grads) const {
  if (grads.size() != params_.size()) throw ContractError("gradient buffer does not match parameters");
  if (target.rows() != 1 || target.cols() != image.cols()) throw ContractError("target shape mismatch");
  Trace tr;
  const Matrix z = run(image, training, rng, &tr);
  double loss = 0.0;
  Matrix dz(1, z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    const double zi = static_cast<double>(z(0, i)), yi = static_cast<double>(target(0, i));
    loss += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::abs(zi)));
    const double sig = zi >= 0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
    dz(0, i) = static_cast<S>(sig - yi) * scale;
  }

  const int L = config_.depth();
  const int H = config_.height, W = config_.width;
  auto P = [&](int i) -> const Matrix& { return params_[static_cast<std::size_t>(i)]; };
  auto G = [&](int i) -> Matrix& { return grads[static_cast<std::size_t>(i)]; };
  const bool drop = training && config_.dropout > 0.0;
  const int mb = 4 * L;
  const int hb = mb + 4 + 6 * L;

  G(hb).noalias() += dz * tr.head_in.transpose();
  G(hb + 1)(0, 0) += dz.sum();
  Matrix dx = P(hb).transpose() * dz;

  std::vector<Matrix> dskip(L);
  for (int l = 0; l < L; ++l) {
    const int base = mb + 4 + 6 * (L - 1 - l);
    const int h = H >> l, w = W >> l;
    auto& lv = tr.dec[l];
    relu_backward<S>(dx, lv.b);
    Matrix da = conv3_backward<S>(lv.a, P(base + 4), dx, h, w, G(base + 4), G(base + 5), true);
    relu_backward<S>(da, lv.a);
    Matrix dcat = conv3_backward<S>(lv.in, P(base + 2), da, h, w, G(base + 2), G(base + 3), true);
    const Eigen::Index cu = P(base + 1).rows();
    dskip[l] = dcat.bottomRows(dcat.rows() - cu);
    Matrix du = dcat.topRows(cu);
    dx = upconv_backward<S>(tr.up_in[l], P(base), du, h / 2, w / 2, G(base), G(base + 1));
  }
  {
    const int h = H >> L, w = W >> L;
    if (drop) dx.array() *= tr.drop[static_cast<std::size_t>(L)].array();
    relu_backward<S>(dx, tr.mid.b);
    Matrix da = conv3_backward<S>(tr.mid.a, P(mb + 2), dx, h, w, G(mb + 2), G(mb + 3), true);
    relu_backward<S>(da, tr.mid.a);
    dx = conv3_backward<S>(tr.mid.in, P(mb), da, h, w, G(mb), G(mb + 1), true);
  }
  for (int l = L - 1; l >= 0; --l) {
    const int h = H >> l, w = W >> l;
    auto& lv = tr.enc[l];
    if (drop) dx.array() *= tr.drop[static_cast<std::size_t>(l)].array();
    Matrix db = maxpool_backward<S>(dx, tr.pool_idx[l], h, w);
    db += dskip[l];
    relu_backward<S>(db, lv.b);
    Matrix da = conv3_backward<S>(lv.a, P(4 * l + 2), db, h, w, G(4 * l + 2), G(4 * l + 3), true);
    relu_backward<S>(da, lv.a);
    dx = conv3_backward<S>(lv.in, P(4 * l), da, h, w, G(4 * l), G(4 * l + 1), l > 0);
  }
  return loss;
}

template class Network<float>;
template class Network<double>;

}  // namespace hitop::segnet
