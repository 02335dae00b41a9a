#pragma once

#include <span>
#include <string>
#include <vector>

#include "hitop/topopt/ellipse.hpp"

namespace hitop::topopt {

/// Per-element minimum feature size (filter radius), in element units,
/// row-major like the element numbering.
class RminMap {
 public:
  RminMap() = default;
  RminMap(int nelx, int nely, double uniform);
  RminMap(int nelx, int nely, std::vector<double> values);

  int nelx() const noexcept { return nelx_; }
  int nely() const noexcept { return nely_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t e) const noexcept { return values_[e]; }
  double at(int row, int col) const noexcept { return values_[static_cast<std::size_t>(row) * nelx_ + col]; }
  const std::vector<double>& values() const noexcept { return values_; }

  void set(std::size_t e, double r);
  double min() const;
  double max() const;

  bool operator==(const RminMap&) const = default;

 private:
  void check() const;

  int nelx_ = 0;
  int nely_ = 0;
  std::vector<double> values_;
};

/// Sparse row-stochastic filter operator. Row e lists every element whose
/// centroid lies within r_e of e's centroid (receiver-centred radius) with
/// weight H_ei = max(0, r_e - dist(e, i)).
struct Neighborhoods {
  int nelx = 0;
  int nely = 0;
  std::vector<int> row_start;  // size nel + 1
  std::vector<int> members;
  std::vector<double> weights;
  std::vector<double> weight_sums;

  int element_count() const noexcept { return nelx * nely; }
  std::span<const int> members_of(int e) const noexcept {
    return {members.data() + row_start[e], static_cast<std::size_t>(row_start[e + 1] - row_start[e])};
  }
  std::span<const double> weights_of(int e) const noexcept {
    return {weights.data() + row_start[e], static_cast<std::size_t>(row_start[e + 1] - row_start[e])};
  }
};

Neighborhoods build_neighborhoods(int nelx, int nely, const RminMap& rmin);

/// x̃_e = sum_i H_ei x_i / sum_i H_ei.
std::vector<double> density_filter(std::span<const double> x, const Neighborhoods& nb);

/// Adjoint of density_filter: out_i = sum_e H_ei / (sum_j H_ej) * v_e.
std::vector<double> filter_transpose(std::span<const double> v, const Neighborhoods& nb);

/// x̄ = [tanh(βη) + tanh(β(x̃-η))] / [tanh(βη) + tanh(β(1-η))].
double heaviside(double x_filtered, double beta, double eta) noexcept;
double heaviside_derivative(double x_filtered, double beta, double eta) noexcept;
/// x̃ with heaviside(x̃) = target, for target in [0, 1].
double heaviside_inverse(double target, double beta, double eta) noexcept;
std::vector<double> heaviside_project(std::span<const double> x_filtered, double beta, double eta);
std::vector<double> heaviside_gradient(std::span<const double> x_filtered, double beta, double eta);

struct RegionEdit {
  RminMap rmin;
  int inside = 0;    ///< elements whose centroid lies in the ellipse
  int changed = 0;   ///< of those, elements whose radius actually changed
  std::vector<std::string> warnings;
};

/// Sets r_min = new_rmin for every element whose centroid lies inside the
/// ellipse. A region that misses the domain is a no-op with a warning.
RegionEdit apply_region_rmin(const RminMap& rmin, const EllipseRegion& region, double new_rmin);

}  // namespace hitop::topopt
