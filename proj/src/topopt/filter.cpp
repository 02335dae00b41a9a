#include "hitop/topopt/filter.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "hitop/common/error.hpp"

namespace hitop::topopt {

RminMap::RminMap(int nelx, int nely, double uniform)
    : nelx_(nelx), nely_(nely), values_(static_cast<std::size_t>(nelx) * static_cast<std::size_t>(nely), uniform) {
  check();
}

RminMap::RminMap(int nelx, int nely, std::vector<double> values) : nelx_(nelx), nely_(nely), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(nelx) * static_cast<std::size_t>(nely))
    throw ContractError("rmin map size does not match the mesh");
  check();
}

void RminMap::check() const {
  if (nelx_ < 1 || nely_ < 1) throw ContractError("rmin map needs a non-empty mesh");
  for (double r : values_)
    if (!std::isfinite(r) || r < 1.0) throw ParameterError("rmin must be finite and >= 1, got " + std::to_string(r));
}

void RminMap::set(std::size_t e, double r) {
  if (!std::isfinite(r) || r < 1.0) throw ParameterError("rmin must be finite and >= 1, got " + std::to_string(r));
  values_.at(e) = r;
}

double RminMap::min() const { return *std::min_element(values_.begin(), values_.end()); }
double RminMap::max() const { return *std::max_element(values_.begin(), values_.end()); }

Neighborhoods build_neighborhoods(int nelx, int nely, const RminMap& rmin) {
  if (rmin.nelx() != nelx || rmin.nely() != nely) throw ContractError("rmin map does not match the mesh");
  Neighborhoods nb;
  nb.nelx = nelx;
  nb.nely = nely;
  const int nel = nelx * nely;
  nb.row_start.reserve(static_cast<std::size_t>(nel) + 1);
  nb.weight_sums.resize(static_cast<std::size_t>(nel));
  nb.row_start.push_back(0);
  for (int e = 0; e < nel; ++e) {
    const int row = e / nelx;
    const int col = e % nelx;
    const double r = rmin[static_cast<std::size_t>(e)];
    const double r2 = r * r * (1.0 + 1e-12);
    const int reach = static_cast<int>(std::ceil(r));
    double sum = 0.0;
    for (int i = std::max(0, row - reach); i <= std::min(nely - 1, row + reach); ++i) {
      for (int j = std::max(0, col - reach); j <= std::min(nelx - 1, col + reach); ++j) {
        const double d2 = static_cast<double>((i - row) * (i - row) + (j - col) * (j - col));
        if (d2 > r2) continue;
        const double w = std::max(0.0, r - std::sqrt(d2));
        nb.members.push_back(i * nelx + j);
        nb.weights.push_back(w);
        sum += w;
      }
    }
    nb.weight_sums[static_cast<std::size_t>(e)] = sum;
    nb.row_start.push_back(static_cast<int>(nb.members.size()));
  }
  return nb;
}

std::vector<double> density_filter(std::span<const double> x, const Neighborhoods& nb) {
  const int nel = nb.element_count();
  if (static_cast<int>(x.size()) != nel) throw ContractError("filter input does not match the mesh");
  std::vector<double> out(static_cast<std::size_t>(nel));
  for (int e = 0; e < nel; ++e) {
    double acc = 0.0;
    for (int k = nb.row_start[e]; k < nb.row_start[e + 1]; ++k)
      acc += nb.weights[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(nb.members[static_cast<std::size_t>(k)])];
    out[static_cast<std::size_t>(e)] = acc / nb.weight_sums[static_cast<std::size_t>(e)];
  }
  return out;
}

std::vector<double> filter_transpose(std::span<const double> v, const Neighborhoods& nb) {
  const int nel = nb.element_count();
  if (static_cast<int>(v.size()) != nel) throw ContractError("filter adjoint input does not match the mesh");
  std::vector<double> out(static_cast<std::size_t>(nel), 0.0);
  for (int e = 0; e < nel; ++e) {
    const double scale = v[static_cast<std::size_t>(e)] / nb.weight_sums[static_cast<std::size_t>(e)];
    for (int k = nb.row_start[e]; k < nb.row_start[e + 1]; ++k)
      out[static_cast<std::size_t>(nb.members[static_cast<std::size_t>(k)])] += nb.weights[static_cast<std::size_t>(k)] * scale;
  }
  return out;
}

double heaviside(double xt, double beta, double eta) noexcept {
  const double a = std::tanh(beta * eta);
  return (a + std::tanh(beta * (xt - eta))) / (a + std::tanh(beta * (1.0 - eta)));
}

double heaviside_derivative(double xt, double beta, double eta) noexcept {
  const double a = std::tanh(beta * eta);
  const double t = std::tanh(beta * (xt - eta));
  return beta * (1.0 - t * t) / (a + std::tanh(beta * (1.0 - eta)));
}

double heaviside_inverse(double target, double beta, double eta) noexcept {
  const double a = std::tanh(beta * eta);
  const double t = std::clamp(target * (a + std::tanh(beta * (1.0 - eta))) - a, -1.0, 1.0);
  return std::clamp(eta + std::atanh(t) / beta, 0.0, 1.0);
}

std::vector<double> heaviside_project(std::span<const double> xt, double beta, double eta) {
  std::vector<double> out(xt.size());
  for (std::size_t i = 0; i < xt.size(); ++i) out[i] = std::clamp(heaviside(xt[i], beta, eta), 0.0, 1.0);
  return out;
}

std::vector<double> heaviside_gradient(std::span<const double> xt, double beta, double eta) {
  std::vector<double> out(xt.size());
  for (std::size_t i = 0; i < xt.size(); ++i) out[i] = heaviside_derivative(xt[i], beta, eta);
  return out;
}

RegionEdit apply_region_rmin(const RminMap& rmin, const EllipseRegion& region, double new_rmin) {
  if (!std::isfinite(new_rmin) || new_rmin < 1.0)
    throw ParameterError("new rmin must be finite and >= 1, got " + std::to_string(new_rmin));
  region.validate();
  RegionEdit edit{rmin, 0, 0, {}};
  const auto shape = QuadraticRegion::from_ellipse(region);
  for (int row = 0; row < rmin.nely(); ++row) {
    for (int col = 0; col < rmin.nelx(); ++col) {
      if (!shape.contains(row, col)) continue;
      const auto e = static_cast<std::size_t>(row) * rmin.nelx() + col;
      ++edit.inside;
      if (edit.rmin[e] != new_rmin) {
        edit.rmin.set(e, new_rmin);
        ++edit.changed;
      }
    }
  }
  if (edit.inside == 0) {
    edit.warnings.emplace_back("region does not cover any element centroid; rmin map unchanged");
    spdlog::warn("apply_region_rmin: {}", edit.warnings.back());
  }
  return edit;
}

}  // namespace hitop::topopt
