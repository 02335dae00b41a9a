#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitop/common/grid.hpp"
#include "hitop/fea/problem.hpp"
#include "hitop/skeleton/skeleton.hpp"
#include "hitop/topopt/ellipse.hpp"

namespace hitop::dataset {

// ---------------------------------------------------------------- filters

/// Solid 8-connected components plus void 4-connected components that do not
/// touch the image border.
int count_distinct_regions(const Mask& solid);

/// Nearest-neighbour magnification by an integer factor >= 1.
template <typename T>
Grid<T> upscale(const Grid<T>& grid, int factor);

// ---------------------------------------------------------------- sources

struct DesignSource {
  std::string id;
  DensityGrid density;
};

/// Reads every .png (gray / 255) and .npy file of a directory in name order.
/// Values outside [0,1] are clamped and unreadable files skipped, both with a
/// warning. Throws IngestError when nothing usable is found.
std::vector<DesignSource> ingest_directory(const std::filesystem::path& dir);

/// Support layouts used for generated designs on a square mesh. The ClampedX
/// layouts clamp one half of one edge, e.g. ClampedLeftLower clamps the lower
/// half of the left edge.
enum class Scenario {
  ClampedLeftLower,
  ClampedLeftUpper,
  ClampedRightLower,
  ClampedRightUpper,
  ClampedBottomLeft,
  ClampedBottomRight,
  ClampedTopLeft,
  ClampedTopRight,
  SimplySupported,
  HalfBeamLeft,
  PinnedCornersLeft,
};
inline constexpr int kScenarioCount = 11;
const char* to_string(Scenario s) noexcept;

struct GeneratedProblem {
  fea::DesignProblem problem;
  Scenario scenario = Scenario::ClampedLeftLower;
  int load_node_row = 0;
  int load_node_col = 0;
  double load_angle = 0.0;  ///< radians, from +x towards +y
};

/// Volume fraction from {0.30, 0.32, ..., 0.50}, a scenario, a load on a free
/// boundary node and a direction from {0, pi/6, ..., pi}.
GeneratedProblem random_problem(std::uint64_t seed, int index, int mesh);

struct GenerationOptions {
  int mesh = 32;
  double rmin = 1.5;
  int max_iters = 200;
  std::uint64_t seed = 1;
};

/// Optimises random problem `index` (id "s<seed>_<index:05>"). Returns nothing
/// when the solve fails.
std::optional<DesignSource> generate_design(int index, const GenerationOptions& options);

/// Optimises `n` random problems. Deterministic per seed; designs whose solve
/// fails are skipped with a log line.
std::vector<DesignSource> generate_corpus_designs(int n, const GenerationOptions& options,
                                                  const std::function<void(int, int)>& progress = {});

// ---------------------------------------------------------------- masks

enum class Criterion { LongestMember, ComplexNode };
const char* to_string(Criterion c) noexcept;
Criterion criterion_from_string(const std::string& s);

struct CircleRegion {
  double center_row = 0.0;
  double center_col = 0.0;
  double radius = 1.0;
  bool operator==(const CircleRegion&) const = default;
};

/// Selection region descriptor: an ellipse for longest-member masks, a circle
/// for node masks. `shape` is the implicit form the mask is rasterised from.
struct RegionDescriptor {
  Criterion criterion = Criterion::LongestMember;
  EllipseRegion ellipse;
  CircleRegion circle;
  QuadraticRegion shape;
  double member_path_length = 0.0;  ///< longest member only
  std::vector<double> incident_lengths;  ///< node only

  nlohmann::json to_json() const;
  static RegionDescriptor from_json(const nlohmann::json& doc);
};

/// Edge with the largest path length; ties go to the lowest id.
int select_longest_member(const skeleton::SkeletonGraph& graph);
/// Node of largest degree; ties go to the lowest id.
int select_most_complex_node(const skeleton::SkeletonGraph& graph);

/// Pixels of `solid` inside `shape`.
Mask rasterize_mask(const Mask& solid, const QuadraticRegion& shape);

struct MaskResult {
  Mask mask;
  RegionDescriptor region;
};

/// Ellipse whose major axis joins the member's end nodes; semi_minor is a third
/// of semi_major.
MaskResult build_mask_longest(const Mask& solid, const skeleton::SkeletonGraph& graph, int edge);
/// Circle around the node with radius equal to the mean incident path length.
MaskResult build_mask_node(const Mask& solid, const skeleton::SkeletonGraph& graph, int node);

// ---------------------------------------------------------------- augmentation

enum class Augmentation { Orig, Rot90, Rot180, Rot270, FlipH, FlipV };
const char* to_string(Augmentation a) noexcept;
Augmentation augmentation_from_string(const std::string& s);

/// The six variants for square images, four (no quarter turns) otherwise.
std::vector<Augmentation> augmentations_for(int rows, int cols);

/// Rotations are counter-clockwise; FlipH mirrors left-right, FlipV top-bottom.
template <typename T>
Grid<T> transform_grid(const Grid<T>& g, Augmentation a);
Pixel transform_pixel(Pixel p, int rows, int cols, Augmentation a);
QuadraticRegion transform_region(const QuadraticRegion& q, int rows, int cols, Augmentation a);
EllipseRegion transform_ellipse(const EllipseRegion& e, int rows, int cols, Augmentation a);
RegionDescriptor transform_descriptor(const RegionDescriptor& d, int rows, int cols, Augmentation a);

struct PreferenceSample {
  std::string base_id;
  Augmentation augmentation = Augmentation::Orig;
  Mask topology;
  Mask mask;
  RegionDescriptor region;
};

std::vector<PreferenceSample> augment_pair(const PreferenceSample& sample);

// ---------------------------------------------------------------- corpus

enum class Split { Train, Val, Test };
const char* to_string(Split s) noexcept;
Split split_from_string(const std::string& s);

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
  void validate() const;
};

/// Split per base design: a seeded shuffle of `count` bases, first round(train*n)
/// to train, next round(val*n) to val, the rest to test.
std::vector<Split> assign_splits(int count, const SplitFractions& fractions, std::uint64_t seed);

struct SampleRecord {
  std::string id;  ///< <base>_<aug>
  std::string base_id;
  Augmentation augmentation = Augmentation::Orig;
  Criterion criterion = Criterion::LongestMember;
  Split split = Split::Train;
  std::string topology_path;  ///< relative to the corpus directory
  std::string mask_path;
  RegionDescriptor region;

  nlohmann::json to_json() const;
  static SampleRecord from_json(const nlohmann::json& doc);
};

struct StageCounts {
  int input = 0;
  int region_filter = 0;
  int skeletonized = 0;
  int connected = 0;
  int masked = 0;
  int pairs = 0;
  nlohmann::json to_json() const;
};

struct CorpusOptions {
  Criterion criterion = Criterion::LongestMember;
  SplitFractions fractions;
  std::uint64_t seed = 1;
  int upscale_factor = 2;
  int min_regions = 3;
  std::filesystem::path out_dir;
};

struct CorpusManifest {
  std::vector<SampleRecord> samples;
  SplitFractions fractions;
  std::uint64_t seed = 1;
  StageCounts stages;
};

/// upscale -> region filter -> skeleton -> connectivity filter -> mask ->
/// augment -> split. Writes <id>_topo.png / <id>_mask.png, manifest.jsonl and
/// stages.json under out_dir. Throws CorpusError when no design survives.
CorpusManifest build_corpus(const std::vector<DesignSource>& sources, const CorpusOptions& options);

/// Reads manifest.jsonl (and stages.json when present) from a corpus directory.
CorpusManifest load_manifest(const std::filesystem::path& dir);

struct LoadedPair {
  Mask topology;
  Mask mask;
};
LoadedPair load_pair(const std::filesystem::path& dir, const SampleRecord& record);

}  // namespace hitop::dataset
