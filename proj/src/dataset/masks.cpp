#include <spdlog/spdlog.h>

#include <cmath>
#include <numbers>

#include "hitop/common/error.hpp"
#include "hitop/dataset/dataset.hpp"

namespace hitop::dataset {

using skeleton::SkeletonGraph;

const char* to_string(Criterion c) noexcept {
  return c == Criterion::LongestMember ? "longest-member" : "complex-node";
}

Criterion criterion_from_string(const std::string& s) {
  if (s == "longest-member") return Criterion::LongestMember;
  if (s == "complex-node") return Criterion::ComplexNode;
  throw ValidationError("criterion", "unknown criterion '" + s + "'");
}

int select_longest_member(const SkeletonGraph& graph) {
  if (graph.edges.empty()) throw ContractError("graph has no members");
  int best = 0;
  for (std::size_t i = 1; i < graph.edges.size(); ++i)
    if (graph.edges[i].path_length > graph.edges[static_cast<std::size_t>(best)].path_length)
      best = static_cast<int>(i);
  return best;
}

int select_most_complex_node(const SkeletonGraph& graph) {
  if (graph.nodes.empty()) throw ContractError("graph has no nodes");
  const auto deg = graph.degrees();
  int best = 0;
  for (std::size_t i = 1; i < deg.size(); ++i)
    if (deg[i] > deg[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

Mask rasterize_mask(const Mask& solid, const QuadraticRegion& shape) {
  Mask out(solid.rows(), solid.cols());
  for (int r = 0; r < solid.rows(); ++r)
    for (int c = 0; c < solid.cols(); ++c) out(r, c) = (solid(r, c) && shape.contains(r, c)) ? 1 : 0;
  return out;
}

MaskResult build_mask_longest(const Mask& solid, const SkeletonGraph& graph, int edge) {
  if (edge < 0 || edge >= static_cast<int>(graph.edges.size())) throw ContractError("member id out of range");
  const auto& e = graph.edges[static_cast<std::size_t>(edge)];
  const auto& a = graph.nodes[static_cast<std::size_t>(e.a)];
  const auto& b = graph.nodes[static_cast<std::size_t>(e.b)];
  if (a.row == b.row && a.col == b.col) throw ContractError("member has zero length");
  MaskResult out;
  auto& d = out.region;
  d.criterion = Criterion::LongestMember;
  d.member_path_length = e.path_length;
  const double dr = b.row - a.row, dc = b.col - a.col;
  d.ellipse.center_row = 0.5 * (a.row + b.row);
  d.ellipse.center_col = 0.5 * (a.col + b.col);
  d.ellipse.rotation = normalize_axis_angle(std::atan2(dr, dc));
  // semi_major is formed as 3 * semi_minor so the stored ratio is exactly 3.
  d.ellipse.semi_minor = std::hypot(dr, dc) / 6.0;
  d.ellipse.semi_major = 3.0 * d.ellipse.semi_minor;
  d.shape = QuadraticRegion::from_ellipse(d.ellipse);
  out.mask = rasterize_mask(solid, d.shape);
  if (count_set(out.mask) == 0) throw ContractError("member mask is empty");
  return out;
}

MaskResult build_mask_node(const Mask& solid, const SkeletonGraph& graph, int node) {
  if (node < 0 || node >= static_cast<int>(graph.nodes.size())) throw ContractError("node id out of range");
  MaskResult out;
  auto& d = out.region;
  d.criterion = Criterion::ComplexNode;
  for (const auto& e : graph.edges)
    if (e.a == node || e.b == node) d.incident_lengths.push_back(e.path_length);
  if (d.incident_lengths.empty()) throw ContractError("node has no incident members");
  double sum = 0.0;
  for (double l : d.incident_lengths) sum += l;
  const auto& n = graph.nodes[static_cast<std::size_t>(node)];
  d.circle = {double(n.row), double(n.col), sum / double(d.incident_lengths.size())};
  if (!(d.circle.radius > 0.0)) throw ContractError("node members have zero length");
  d.shape = QuadraticRegion::circle(d.circle.center_row, d.circle.center_col, d.circle.radius);
  out.mask = rasterize_mask(solid, d.shape);
  if (count_set(out.mask) == 0) throw ContractError("node mask is empty");
  return out;
}

namespace {

nlohmann::json shape_json(const QuadraticRegion& q) {
  return {{"center", {q.center_row, q.center_col}}, {"a_rr", q.a_rr}, {"a_cc", q.a_cc}, {"a_rc", q.a_rc}};
}

}  // namespace

nlohmann::json RegionDescriptor::to_json() const {
  nlohmann::json j{{"criterion", dataset::to_string(criterion)}, {"shape", shape_json(shape)}};
  if (criterion == Criterion::LongestMember) {
    j["ellipse"] = hitop::to_json(ellipse);
    j["member_path_length"] = member_path_length;
  } else {
    j["circle"] = {{"center", {circle.center_row, circle.center_col}}, {"radius", circle.radius}};
    j["incident_lengths"] = incident_lengths;
  }
  return j;
}

RegionDescriptor RegionDescriptor::from_json(const nlohmann::json& j) {
  try {
    RegionDescriptor d;
    d.criterion = criterion_from_string(j.at("criterion").get<std::string>());
    const auto& s = j.at("shape");
    d.shape.center_row = s.at("center").at(0).get<double>();
    d.shape.center_col = s.at("center").at(1).get<double>();
    d.shape.a_rr = s.at("a_rr").get<double>();
    d.shape.a_cc = s.at("a_cc").get<double>();
    d.shape.a_rc = s.at("a_rc").get<double>();
    if (d.criterion == Criterion::LongestMember) {
      d.ellipse = ellipse_from_json(j.at("ellipse"));
      d.member_path_length = j.at("member_path_length").get<double>();
    } else {
      const auto& c = j.at("circle");
      d.circle = {c.at("center").at(0).get<double>(), c.at("center").at(1).get<double>(),
                  c.at("radius").get<double>()};
      d.incident_lengths = j.at("incident_lengths").get<std::vector<double>>();
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("region", e.what());
  }
}

// ---------------------------------------------------------------- augmentation

const char* to_string(Augmentation a) noexcept {
  switch (a) {
    case Augmentation::Orig: return "orig";
    case Augmentation::Rot90: return "rot90";
    case Augmentation::Rot180: return "rot180";
    case Augmentation::Rot270: return "rot270";
    case Augmentation::FlipH: return "flipH";
    case Augmentation::FlipV: return "flipV";
  }
  return "orig";
}

Augmentation augmentation_from_string(const std::string& s) {
  for (auto a : {Augmentation::Orig, Augmentation::Rot90, Augmentation::Rot180, Augmentation::Rot270,
                 Augmentation::FlipH, Augmentation::FlipV})
    if (s == to_string(a)) return a;
  throw ValidationError("augmentation", "unknown augmentation '" + s + "'");
}

std::vector<Augmentation> augmentations_for(int rows, int cols) {
  if (rows == cols)
    return {Augmentation::Orig, Augmentation::Rot90, Augmentation::Rot180, Augmentation::Rot270,
            Augmentation::FlipH, Augmentation::FlipV};
  return {Augmentation::Orig, Augmentation::Rot180, Augmentation::FlipH, Augmentation::FlipV};
}

Pixel transform_pixel(Pixel p, int R, int C, Augmentation a) {
  switch (a) {
    case Augmentation::Orig: return p;
    case Augmentation::Rot90: return {C - 1 - p.col, p.row};
    case Augmentation::Rot180: return {R - 1 - p.row, C - 1 - p.col};
    case Augmentation::Rot270: return {p.col, R - 1 - p.row};
    case Augmentation::FlipH: return {p.row, C - 1 - p.col};
    case Augmentation::FlipV: return {R - 1 - p.row, p.col};
  }
  return p;
}

template <typename T>
Grid<T> transform_grid(const Grid<T>& g, Augmentation a) {
  const int R = g.rows(), C = g.cols();
  const bool quarter = a == Augmentation::Rot90 || a == Augmentation::Rot270;
  Grid<T> out(quarter ? C : R, quarter ? R : C);
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) out(transform_pixel({r, c}, R, C, a)) = g(r, c);
  return out;
}

template Grid<std::uint8_t> transform_grid(const Grid<std::uint8_t>&, Augmentation);
template Grid<double> transform_grid(const Grid<double>&, Augmentation);
template Grid<float> transform_grid(const Grid<float>&, Augmentation);

namespace {

// Same map as transform_pixel on real coordinates. Exact for half-integer centres.
std::pair<double, double> transform_point(double r, double c, int R, int C, Augmentation a) {
  switch (a) {
    case Augmentation::Orig: return {r, c};
    case Augmentation::Rot90: return {(C - 1) - c, r};
    case Augmentation::Rot180: return {(R - 1) - r, (C - 1) - c};
    case Augmentation::Rot270: return {c, (R - 1) - r};
    case Augmentation::FlipH: return {r, (C - 1) - c};
    case Augmentation::FlipV: return {(R - 1) - r, c};
  }
  return {r, c};
}

}  // namespace

QuadraticRegion transform_region(const QuadraticRegion& q, int R, int C, Augmentation a) {
  QuadraticRegion t = q;
  std::tie(t.center_row, t.center_col) = transform_point(q.center_row, q.center_col, R, C, a);
  switch (a) {
    case Augmentation::Orig:
    case Augmentation::Rot180: break;
    case Augmentation::Rot90:
    case Augmentation::Rot270:
      t.a_rr = q.a_cc;
      t.a_cc = q.a_rr;
      t.a_rc = -q.a_rc;
      break;
    case Augmentation::FlipH:
    case Augmentation::FlipV: t.a_rc = -q.a_rc; break;
  }
  return t;
}

EllipseRegion transform_ellipse(const EllipseRegion& e, int R, int C, Augmentation a) {
  EllipseRegion t = e;
  std::tie(t.center_row, t.center_col) = transform_point(e.center_row, e.center_col, R, C, a);
  constexpr double half_pi = std::numbers::pi / 2.0;
  switch (a) {
    case Augmentation::Orig:
    case Augmentation::Rot180: break;
    case Augmentation::Rot90: t.rotation = e.rotation - half_pi; break;
    case Augmentation::Rot270: t.rotation = e.rotation + half_pi; break;
    case Augmentation::FlipH:
    case Augmentation::FlipV: t.rotation = -e.rotation; break;
  }
  t.rotation = normalize_axis_angle(t.rotation);
  return t;
}

RegionDescriptor transform_descriptor(const RegionDescriptor& d, int R, int C, Augmentation a) {
  RegionDescriptor t = d;
  t.shape = transform_region(d.shape, R, C, a);
  if (d.criterion == Criterion::LongestMember) {
    t.ellipse = transform_ellipse(d.ellipse, R, C, a);
  } else {
    std::tie(t.circle.center_row, t.circle.center_col) =
        transform_point(d.circle.center_row, d.circle.center_col, R, C, a);
  }
  return t;
}

std::vector<PreferenceSample> augment_pair(const PreferenceSample& sample) {
  if (!sample.topology.same_shape(sample.mask)) throw ContractError("mask and topology differ in shape");
  const int R = sample.topology.rows(), C = sample.topology.cols();
  if (R != C) spdlog::info("{}: non-square image, quarter turns skipped", sample.base_id);
  std::vector<PreferenceSample> out;
  for (const auto a : augmentations_for(R, C)) {
    PreferenceSample s;
    s.base_id = sample.base_id;
    s.augmentation = a;
    s.topology = transform_grid(sample.topology, a);
    s.mask = transform_grid(sample.mask, a);
    s.region = transform_descriptor(sample.region, R, C, a);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hitop::dataset
