#include "hitop/copilot/copilot.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "hitop/common/error.hpp"

namespace hitop::copilot {

template <typename T>
Padded<T> pad_void_border(const Grid<T>& image, int width) {
  if (width < 0) throw ParameterError("padding width must be >= 0");
  Padded<T> out{Grid<T>(image.rows() + 2 * width, image.cols() + 2 * width, T{}),
                {width, width, image.rows(), image.cols()}};
  for (int r = 0; r < image.rows(); ++r)
    for (int c = 0; c < image.cols(); ++c) out.image(r + width, c + width) = image(r, c);
  return out;
}

template <typename T>
Grid<T> crop(const Grid<T>& image, const Crop& region) {
  if (region.top < 0 || region.left < 0 || region.rows < 0 || region.cols < 0 ||
      region.top + region.rows > image.rows() || region.left + region.cols > image.cols())
    throw ContractError("crop window lies outside the image");
  Grid<T> out(region.rows, region.cols);
  for (int r = 0; r < region.rows; ++r)
    for (int c = 0; c < region.cols; ++c) out(r, c) = image(r + region.top, c + region.left);
  return out;
}

template Padded<std::uint8_t> pad_void_border(const Grid<std::uint8_t>&, int);
template Padded<float> pad_void_border(const Grid<float>&, int);
template Padded<double> pad_void_border(const Grid<double>&, int);
template Grid<std::uint8_t> crop(const Grid<std::uint8_t>&, const Crop&);
template Grid<float> crop(const Grid<float>&, const Crop&);
template Grid<double> crop(const Grid<double>&, const Crop&);

ThresholdResult threshold_percentile(const Grid<double>& prob, double percentile) {
  if (prob.empty()) throw ContractError("threshold_percentile: empty map");
  if (!(percentile >= 0.0 && percentile < 100.0)) throw ParameterError("percentile must lie in [0,100)");
  const std::size_t n = prob.size();
  const double exact = (100.0 - percentile) * static_cast<double>(n) / 100.0;
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(exact)), 1, n);
  std::vector<double> v = prob.values();
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(), std::greater<>());
  ThresholdResult out;
  out.threshold = v[k - 1];
  out.mask = Mask(prob.rows(), prob.cols(), 0);
  for (std::size_t i = 0; i < n; ++i)
    if (prob[i] >= out.threshold) {
      out.mask[i] = 1;
      ++out.selected;
    }
  const auto [lo, hi] = std::minmax_element(prob.values().begin(), prob.values().end());
  out.degenerate = *lo == *hi;
  return out;
}

std::vector<Pixel> largest_connected_component(const Mask& mask) {
  Grid<int> label(mask.rows(), mask.cols(), -1);
  std::vector<Pixel> best, current, stack;
  int next = 0;
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c) || label(r, c) >= 0) continue;
      current.clear();
      stack.assign(1, {r, c});
      label(r, c) = next;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        current.push_back(p);
        for (int k = 0; k < 8; ++k) {
          const Pixel q{p.row + kNeighbourRow[k], p.col + kNeighbourCol[k]};
          if (mask.contains(q) && mask(q) && label(q) < 0) {
            label(q) = next;
            stack.push_back(q);
          }
        }
      }
      ++next;
      // Components are discovered in order of their smallest pixel, so a tie keeps the earlier one.
      if (current.size() > best.size()) best = current;
    }
  if (best.empty()) throw ContractError("largest_connected_component: mask is empty");
  std::sort(best.begin(), best.end());
  return best;
}

namespace {

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
}

// Andrew's monotone chain; collinear points are dropped.
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

EllipseRegion from_quadratic(const Eigen::Vector2d& center, const Eigen::Matrix2d& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
  const Eigen::Vector2d major = es.eigenvectors().col(0);  // smallest eigenvalue
  EllipseRegion e;
  e.center_row = center.x();
  e.center_col = center.y();
  e.semi_major = 1.0 / std::sqrt(es.eigenvalues()(0));
  e.semi_minor = 1.0 / std::sqrt(es.eigenvalues()(1));
  e.rotation = normalize_axis_angle(std::atan2(major.x(), major.y()));
  return e;
}

EllipseRegion padded(EllipseRegion e) {
  e.semi_major = std::max(e.semi_major, 1.0);
  e.semi_minor = std::max(e.semi_minor, 1.0);
  return e.canonical();
}

}  // namespace

EllipseRegion min_enclosing_ellipse(const std::vector<Pixel>& pixels, double tolerance) {
  if (pixels.empty()) throw ContractError("min_enclosing_ellipse: no pixels");
  if (!(tolerance > 0.0)) throw ParameterError("tolerance must be > 0");
  // (row, col) vectors
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(pixels.size());
  for (const auto& p : pixels) pts.emplace_back(p.row, p.col);
  const auto hull = convex_hull(pts);

  if (hull.size() == 1) {
    EllipseRegion e;
    e.center_row = hull[0].x();
    e.center_col = hull[0].y();
    return e;
  }
  if (hull.size() == 2) {
    const Eigen::Vector2d d = hull[1] - hull[0];
    EllipseRegion e;
    e.center_row = 0.5 * (hull[0].x() + hull[1].x());
    e.center_col = 0.5 * (hull[0].y() + hull[1].y());
    e.semi_major = 0.5 * d.norm();
    e.semi_minor = 1.0;
    e.rotation = normalize_axis_angle(std::atan2(d.x(), d.y()));
    return padded(e);
  }

  // Khachiyan on the hull vertices (the MVEE only depends on them).
  const int n = static_cast<int>(hull.size());
  constexpr int d = 2;
  Eigen::MatrixXd q(3, n);
  for (int i = 0; i < n; ++i) q.col(i) << hull[static_cast<std::size_t>(i)], 1.0;
  Eigen::VectorXd u = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int iter = 0; iter < 100000; ++iter) {
    const Eigen::Matrix3d x = q * u.asDiagonal() * q.transpose();
    const Eigen::Matrix3d xi = x.inverse();
    Eigen::Index j = 0;
    double mj = -1.0;
    for (int i = 0; i < n; ++i) {
      const double m = q.col(i).dot(xi * q.col(i));
      if (m > mj) {
        mj = m;
        j = i;
      }
    }
    if (mj <= (1.0 + tolerance) * (d + 1)) break;
    const double step = (mj - d - 1) / ((d + 1) * (mj - 1));
    u *= 1.0 - step;
    u(j) += step;
  }
  Eigen::MatrixXd p(2, n);
  for (int i = 0; i < n; ++i) p.col(i) = hull[static_cast<std::size_t>(i)];
  const Eigen::Vector2d c = p * u;
  const Eigen::Matrix2d cov = p * u.asDiagonal() * p.transpose() - c * c.transpose();
  Eigen::Matrix2d a = cov.inverse() / d;
  double worst = 0.0;
  for (const auto& v : hull) worst = std::max(worst, (v - c).dot(a * (v - c)));
  a /= worst;
  return padded(from_quadratic(c, a));
}

nlohmann::json Recommendation::to_json() const {
  return {{"center", {ellipse.center_row, ellipse.center_col}},
          {"semi_major", ellipse.semi_major},
          {"semi_minor", ellipse.semi_minor},
          {"rotation", ellipse.rotation},
          {"confidence", mean_probability},
          {"low_confidence", low_confidence},
          {"cluster_size", cluster_size},
          {"threshold", threshold},
          {"model_id", model_id}};
}

Recommendation recommend(const segnet::SegModel& model, const Mask& topology, int min_border) {
  const Grid<double> prob = segnet::predict_image(model, topology, min_border);
  const ThresholdResult th = threshold_percentile(prob);
  const auto cluster = largest_connected_component(th.mask);
  Recommendation rec;
  rec.ellipse = min_enclosing_ellipse(cluster);
  rec.cluster_size = cluster.size();
  rec.threshold = th.threshold;
  rec.model_id = model.id();
  double sum = 0.0;
  bool touches_solid = false;
  for (const auto& p : cluster) {
    sum += prob(p);
    touches_solid = touches_solid || topology(p) != 0;
  }
  rec.mean_probability = sum / static_cast<double>(cluster.size());
  rec.low_confidence = th.degenerate || !touches_solid;
  return rec;
}

double iou(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw ContractError("iou: mask dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < scores.size(); ++i) samples.push_back({{"id", ids[i]}, {"iou", scores[i]}});
  return {{"mean_iou", mean_iou},
          {"count", scores.size()},
          {"buckets", {{"above_0.80", above_080}, {"0.30_to_0.50", within_030_050}, {"at_most_0.20", at_most_020}}},
          {"samples", samples}};
}

EvalReport summarize(std::vector<std::string> ids, std::vector<double> scores) {
  if (ids.size() != scores.size()) throw ContractError("summarize: ids and scores differ in length");
  EvalReport r;
  r.ids = std::move(ids);
  r.scores = std::move(scores);
  if (r.scores.empty()) return r;
  const double n = static_cast<double>(r.scores.size());
  for (double s : r.scores) {
    r.mean_iou += s;
    r.above_080 += s > 0.80;
    r.within_030_050 += s >= 0.30 && s <= 0.50;
    r.at_most_020 += s <= 0.20;
  }
  r.mean_iou /= n;
  r.above_080 /= n;
  r.within_030_050 /= n;
  r.at_most_020 /= n;
  return r;
}

MaskPredictor model_predictor(const segnet::SegModel& model, int min_border) {
  return [&model, min_border](const dataset::SampleRecord&, const Mask& topology) {
    return threshold_percentile(segnet::predict_image(model, topology, min_border)).mask;
  };
}

MaskPredictor random_predictor(double density, std::uint64_t seed) {
  if (!(density > 0.0 && density <= 1.0)) throw ParameterError("density must lie in (0,1]");
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng, density](const dataset::SampleRecord&, const Mask& topology) {
    const std::size_t n = topology.size();
    const std::size_t k = std::min(n, static_cast<std::size_t>(std::ceil(density * static_cast<double>(n))));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Mask out(topology.rows(), topology.cols(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>((*rng)() % (n - i));
      std::swap(idx[i], idx[j]);
      out[idx[i]] = 1;
    }
    return out;
  };
}

EvalReport evaluate(const std::filesystem::path& corpus_dir, const dataset::CorpusManifest& manifest,
                    const MaskPredictor& predictor, dataset::Split split) {
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (const auto& rec : manifest.samples) {
    if (rec.split != split) continue;
    const auto pair = dataset::load_pair(corpus_dir, rec);
    scores.push_back(iou(predictor(rec, pair.topology), pair.mask));
    ids.push_back(rec.id);
  }
  if (scores.empty()) throw ContractError(std::string("evaluate: no samples in split ") + dataset::to_string(split));
  return summarize(std::move(ids), std::move(scores));
}

}  // namespace hitop::copilot
