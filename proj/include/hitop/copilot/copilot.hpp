#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hitop/common/grid.hpp"
#include "hitop/dataset/dataset.hpp"
#include "hitop/segnet/segnet.hpp"
#include "hitop/topopt/ellipse.hpp"

namespace hitop::copilot {

/// Where the original image sits inside a padded one.
struct Crop {
  int top = 0;
  int left = 0;
  int rows = 0;
  int cols = 0;
};

template <typename T>
struct Padded {
  Grid<T> image;
  Crop crop;
};

/// Adds `width` void (zero) pixels on every side. Throws ParameterError for width < 0.
template <typename T>
Padded<T> pad_void_border(const Grid<T>& image, int width = 10);

template <typename T>
Grid<T> crop(const Grid<T>& image, const Crop& region);

struct ThresholdResult {
  Mask mask;
  double threshold = 0.0;
  std::size_t selected = 0;
  bool degenerate = false;  ///< every value equal, so everything is selected
};

/// Pixels >= the value ranked ceil((100 - percentile)% of N) from the top.
/// With distinct values that is exactly ceil(0.1 N) pixels at the default.
ThresholdResult threshold_percentile(const Grid<double>& prob, double percentile = 90.0);

/// Largest 8-connected component; ties go to the component holding the
/// row-major smallest pixel. Returned pixels are sorted. Throws ContractError
/// on an empty mask.
std::vector<Pixel> largest_connected_component(const Mask& mask);

/// Minimum-area ellipse around the pixel centres (Khachiyan, gap tolerance
/// `tolerance`), scaled so the farthest centre lies on the boundary. Both
/// semi-axes are at least 1 px, which covers single pixels and collinear sets.
EllipseRegion min_enclosing_ellipse(const std::vector<Pixel>& pixels, double tolerance = 1e-3);

struct Recommendation {
  EllipseRegion ellipse;  ///< unpadded image frame
  std::size_t cluster_size = 0;
  double mean_probability = 0.0;
  double threshold = 0.0;
  std::string model_id;
  bool low_confidence = false;

  /// {center:[r,c], semi_major, semi_minor, rotation, confidence, ...}
  nlohmann::json to_json() const;
};

/// pad -> predict -> crop -> threshold -> largest component -> ellipse.
/// Low confidence when the threshold is degenerate or the cluster holds no
/// solid pixel of the topology.
Recommendation recommend(const segnet::SegModel& model, const Mask& topology, int min_border = 10);

/// |a & b| / |a | b|, 1 when both are empty. Throws ContractError on a shape mismatch.
double iou(const Mask& a, const Mask& b);

struct EvalReport {
  double mean_iou = 0.0;
  double above_080 = 0.0;    ///< fraction with IOU > 0.80
  double within_030_050 = 0.0;  ///< fraction with 0.3 <= IOU <= 0.5
  double at_most_020 = 0.0;  ///< fraction with IOU <= 0.20
  std::vector<std::string> ids;
  std::vector<double> scores;

  nlohmann::json to_json() const;
};

EvalReport summarize(std::vector<std::string> ids, std::vector<double> scores);

/// Produces the thresholded prediction for one sample.
using MaskPredictor = std::function<Mask(const dataset::SampleRecord&, const Mask& topology)>;

/// Model prediction at the threshold stage (before the component and ellipse steps).
MaskPredictor model_predictor(const segnet::SegModel& model, int min_border = 10);
/// ceil(density * N) pixels drawn uniformly without replacement, seeded.
MaskPredictor random_predictor(double density, std::uint64_t seed);

/// IOU of every sample of `split` against its ground-truth mask. Throws
/// ContractError when the split is empty.
EvalReport evaluate(const std::filesystem::path& corpus_dir, const dataset::CorpusManifest& manifest,
                    const MaskPredictor& predictor, dataset::Split split = dataset::Split::Test);

}  // namespace hitop::copilot
