#pragma once

#include <json.hpp>

namespace hitop {

/// Elliptical region in pixel/element coordinates. Pixel (r, c) has its centre at
/// (row = r, col = c). `rotation` is the angle of the major axis measured from the
/// +col axis towards the +row axis, normalised to (-pi/2, pi/2].
struct EllipseRegion {
  double center_row = 0.0;
  double center_col = 0.0;
  double semi_major = 1.0;
  double semi_minor = 1.0;
  double rotation = 0.0;

  /// Throws ContractError unless semi_major >= semi_minor > 0 and all values are finite.
  void validate() const;
  /// Swaps axes (rotating by 90 degrees) when semi_minor > semi_major, normalises rotation.
  EllipseRegion canonical() const;
  double area() const noexcept;

  bool operator==(const EllipseRegion&) const = default;
};

/// Implicit form (d^T A d <= 1, d = p - center) of an ellipse or circle. Mask
/// construction goes through this form because the dihedral transforms of a
/// square grid act on it exactly (entry permutations and sign flips).
struct QuadraticRegion {
  double center_row = 0.0;
  double center_col = 0.0;
  double a_rr = 1.0;
  double a_cc = 1.0;
  double a_rc = 0.0;

  static QuadraticRegion from_ellipse(const EllipseRegion& e);
  static QuadraticRegion circle(double row, double col, double radius);

  double evaluate(double row, double col) const noexcept {
    const double dr = row - center_row;
    const double dc = col - center_col;
    return (a_rr * (dr * dr) + a_cc * (dc * dc)) + (2.0 * a_rc) * (dr * dc);
  }
  bool contains(double row, double col) const noexcept { return evaluate(row, col) <= 1.0 + 1e-9; }

  bool operator==(const QuadraticRegion&) const = default;
};

/// Wraps an angle into (-pi/2, pi/2] (axis directions are sign-free).
double normalize_axis_angle(double angle) noexcept;

nlohmann::json to_json(const EllipseRegion& e);
EllipseRegion ellipse_from_json(const nlohmann::json& doc);

}  // namespace hitop
