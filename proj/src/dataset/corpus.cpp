#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hitop/common/error.hpp"
#include "hitop/common/image_io.hpp"
#include "hitop/dataset/dataset.hpp"

namespace hitop::dataset {

const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ValidationError("split", "unknown split '" + s + "'");
}

void SplitFractions::validate() const {
  for (double f : {train, val, test})
    if (!(f >= 0.0 && f <= 1.0)) throw ParameterError("split fractions must lie in [0,1]");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ParameterError("split fractions must sum to 1");
}

std::vector<Split> assign_splits(int count, const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  if (count < 0) throw ParameterError("count must be >= 0");
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = static_cast<int>(std::lround(fractions.train * count));
  const int n_val = std::min(count - n_train, static_cast<int>(std::lround(fractions.val * count)));
  std::vector<Split> out(static_cast<std::size_t>(count), Split::Test);
  for (int i = 0; i < count; ++i) {
    const auto b = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
    out[b] = i < n_train ? Split::Train : i < n_train + n_val ? Split::Val : Split::Test;
  }
  return out;
}

nlohmann::json SampleRecord::to_json() const {
  return {{"id", id},
          {"base", base_id},
          {"augmentation", dataset::to_string(augmentation)},
          {"criterion", dataset::to_string(criterion)},
          {"split", dataset::to_string(split)},
          {"topology", topology_path},
          {"mask", mask_path},
          {"region", region.to_json()}};
}

SampleRecord SampleRecord::from_json(const nlohmann::json& j) {
  try {
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.base_id = j.at("base").get<std::string>();
    r.augmentation = augmentation_from_string(j.at("augmentation").get<std::string>());
    r.criterion = criterion_from_string(j.at("criterion").get<std::string>());
    r.split = split_from_string(j.at("split").get<std::string>());
    r.topology_path = j.at("topology").get<std::string>();
    r.mask_path = j.at("mask").get<std::string>();
    r.region = RegionDescriptor::from_json(j.at("region"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("sample", e.what());
  }
}

nlohmann::json StageCounts::to_json() const {
  return {{"input", input},       {"region_filter", region_filter}, {"skeletonized", skeletonized},
          {"connected", connected}, {"masked", masked},             {"pairs", pairs}};
}

CorpusManifest build_corpus(const std::vector<DesignSource>& sources, const CorpusOptions& options) {
  options.fractions.validate();
  if (options.out_dir.empty()) throw ParameterError("corpus output directory is required");
  std::filesystem::create_directories(options.out_dir);

  CorpusManifest manifest;
  manifest.fractions = options.fractions;
  manifest.seed = options.seed;
  auto& st = manifest.stages;
  std::vector<PreferenceSample> bases;

  for (const auto& src : sources) {
    ++st.input;
    const Mask solid = skeleton::binarize(upscale(src.density, options.upscale_factor)).solid;
    if (count_distinct_regions(solid) < options.min_regions) continue;
    ++st.region_filter;
    skeleton::SkeletonGraph graph;
    try {
      graph = skeleton::extract_graph({solid});
    } catch (const Error& e) {
      spdlog::warn("{}: skeleton extraction failed: {}", src.id, e.what());
      continue;
    }
    ++st.skeletonized;
    if (!skeleton::is_connected(graph)) continue;
    ++st.connected;
    try {
      const MaskResult m = options.criterion == Criterion::LongestMember
                               ? build_mask_longest(solid, graph, select_longest_member(graph))
                               : build_mask_node(solid, graph, select_most_complex_node(graph));
      bases.push_back({src.id, Augmentation::Orig, solid, m.mask, m.region});
      ++st.masked;
    } catch (const ContractError& e) {
      spdlog::warn("{}: no mask: {}", src.id, e.what());
    }
  }
  if (bases.empty()) throw CorpusError("no design survived the corpus filters");

  const auto splits = assign_splits(static_cast<int>(bases.size()), options.fractions, options.seed);
  std::ofstream jsonl(options.out_dir / "manifest.jsonl", std::ios::binary);
  if (!jsonl) throw CorpusError("cannot write manifest in " + options.out_dir.string());
  for (std::size_t b = 0; b < bases.size(); ++b) {
    for (auto& s : augment_pair(bases[b])) {
      SampleRecord rec;
      rec.base_id = s.base_id;
      rec.augmentation = s.augmentation;
      rec.id = s.base_id + "_" + to_string(s.augmentation);
      rec.criterion = options.criterion;
      rec.split = splits[b];
      rec.topology_path = rec.id + "_topo.png";
      rec.mask_path = rec.id + "_mask.png";
      rec.region = s.region;
      io::write_png(options.out_dir / rec.topology_path, io::mask_to_gray(s.topology));
      io::write_png(options.out_dir / rec.mask_path, io::mask_to_gray(s.mask));
      jsonl << rec.to_json().dump() << '\n';
      manifest.samples.push_back(std::move(rec));
      ++st.pairs;
    }
  }
  nlohmann::json report = st.to_json();
  report["criterion"] = to_string(options.criterion);
  report["seed"] = options.seed;
  report["fractions"] = {{"train", options.fractions.train}, {"val", options.fractions.val},
                         {"test", options.fractions.test}};
  io::write_text(options.out_dir / "stages.json", report.dump(2) + "\n");
  spdlog::info("corpus: {} input, {} region filter, {} skeletonized, {} connected, {} masked, {} pairs", st.input,
               st.region_filter, st.skeletonized, st.connected, st.masked, st.pairs);
  return manifest;
}

CorpusManifest load_manifest(const std::filesystem::path& dir) {
  CorpusManifest m;
  std::istringstream in(io::read_text(dir / "manifest.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      m.samples.push_back(SampleRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw LoadError("bad manifest line: " + std::string(e.what()));
    }
  }
  if (std::filesystem::exists(dir / "stages.json")) {
    const auto j = nlohmann::json::parse(io::read_text(dir / "stages.json"));
    auto& s = m.stages;
    s.input = j.value("input", 0);
    s.region_filter = j.value("region_filter", 0);
    s.skeletonized = j.value("skeletonized", 0);
    s.connected = j.value("connected", 0);
    s.masked = j.value("masked", 0);
    s.pairs = j.value("pairs", 0);
    m.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("fractions")) {
      m.fractions.train = j["fractions"].value("train", 0.7);
      m.fractions.val = j["fractions"].value("val", 0.1);
      m.fractions.test = j["fractions"].value("test", 0.2);
    }
  }
  return m;
}

LoadedPair load_pair(const std::filesystem::path& dir, const SampleRecord& record) {
  LoadedPair p{io::gray_to_mask(io::read_png(dir / record.topology_path)),
               io::gray_to_mask(io::read_png(dir / record.mask_path))};
  if (!p.topology.same_shape(p.mask)) throw LoadError(record.id + ": mask and topology differ in shape");
  return p;
}

}  // namespace hitop::dataset
