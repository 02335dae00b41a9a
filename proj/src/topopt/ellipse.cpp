#include "hitop/topopt/ellipse.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "hitop/common/error.hpp"

namespace hitop {

double normalize_axis_angle(double angle) noexcept {
  constexpr double pi = std::numbers::pi;
  double a = std::fmod(angle, pi);
  if (a <= -pi / 2.0) a += pi;
  if (a > pi / 2.0) a -= pi;
  return a;
}

void EllipseRegion::validate() const {
  for (double v : {center_row, center_col, semi_major, semi_minor, rotation})
    if (!std::isfinite(v)) throw ContractError("ellipse parameters must be finite");
  if (!(semi_minor > 0.0)) throw ContractError("ellipse semi_minor must be > 0");
  if (semi_major < semi_minor) throw ContractError("ellipse semi_major must be >= semi_minor");
}

EllipseRegion EllipseRegion::canonical() const {
  EllipseRegion e = *this;
  if (e.semi_minor > e.semi_major) {
    std::swap(e.semi_major, e.semi_minor);
    e.rotation += std::numbers::pi / 2.0;
  }
  e.rotation = normalize_axis_angle(e.rotation);
  return e;
}

double EllipseRegion::area() const noexcept { return std::numbers::pi * semi_major * semi_minor; }

QuadraticRegion QuadraticRegion::from_ellipse(const EllipseRegion& e) {
  e.validate();
  // A = R diag(1/a^2, 1/b^2) R^T with the major axis along (sin t, cos t) in (row, col).
  const double s = std::sin(e.rotation);
  const double c = std::cos(e.rotation);
  const double ia = 1.0 / (e.semi_major * e.semi_major);
  const double ib = 1.0 / (e.semi_minor * e.semi_minor);
  QuadraticRegion q;
  q.center_row = e.center_row;
  q.center_col = e.center_col;
  q.a_rr = s * s * ia + c * c * ib;
  q.a_cc = c * c * ia + s * s * ib;
  q.a_rc = s * c * (ia - ib);
  return q;
}

QuadraticRegion QuadraticRegion::circle(double row, double col, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ContractError("circle radius must be finite and > 0");
  QuadraticRegion q;
  q.center_row = row;
  q.center_col = col;
  q.a_rr = q.a_cc = 1.0 / (radius * radius);
  q.a_rc = 0.0;
  return q;
}

nlohmann::json to_json(const EllipseRegion& e) {
  return {{"center", {e.center_row, e.center_col}},
          {"semi_major", e.semi_major},
          {"semi_minor", e.semi_minor},
          {"rotation", e.rotation}};
}

EllipseRegion ellipse_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("ellipse", "must be an object");
  auto number = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_number()) throw ValidationError(std::string("ellipse/") + key, "must be a number");
    return doc[key].get<double>();
  };
  if (!doc.contains("center") || !doc["center"].is_array() || doc["center"].size() != 2 ||
      !doc["center"][0].is_number() || !doc["center"][1].is_number())
    throw ValidationError("ellipse/center", "must be a [row, col] pair");
  EllipseRegion e;
  e.center_row = doc["center"][0].get<double>();
  e.center_col = doc["center"][1].get<double>();
  e.semi_major = number("semi_major");
  e.semi_minor = number("semi_minor");
  e.rotation = doc.contains("rotation") ? number("rotation") : 0.0;
  if (!(e.semi_major > 0.0) || !(e.semi_minor > 0.0)) throw ValidationError("ellipse", "semi axes must be > 0");
  if (e.semi_minor > e.semi_major) e = e.canonical();
  return e;
}

}  // namespace hitop
