#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hitop/common/grid.hpp"
#include "hitop/fea/analysis.hpp"
#include "hitop/fea/problem.hpp"
#include "hitop/topopt/filter.hpp"
#include "hitop/topopt/mma.hpp"

namespace hitop::topopt {

struct DesignState {
  int nelx = 0;
  int nely = 0;
  std::vector<double> x;             ///< design variables
  std::vector<double> x_filtered;    ///< x̃
  std::vector<double> x_projected;   ///< x̄
  int iteration = 0;
  std::vector<double> compliance_history;  ///< one entry per completed iteration
  MmaMemory mma;
  double beta = 25.0;
  double eta = 0.5;
  fea::SimpParams simp;
  double last_change = 0.0;
  bool converged = false;

  double current_compliance() const noexcept {
    return compliance_history.empty() ? 0.0 : compliance_history.back();
  }
  DensityGrid projected_grid() const { return DensityGrid(nely, nelx, x_projected); }
};

/// Design elements start at the uniform x whose projection equals volfrac;
/// passive void / solid start at 0 / 1. x̃ and x̄ are filled in.
DesignState initial_state(const fea::DesignProblem& problem, const RminMap& rmin);

struct Projection {
  std::vector<double> values;      ///< x̄
  std::vector<double> derivative;  ///< dx̄/dx̃, zero on passive elements
};

/// Heaviside projection with passive elements pinned to exactly 0 or 1.
Projection project_densities(std::span<const double> x_filtered, std::span<const fea::ElementRole> roles,
                             double beta, double eta);

/// Recomputes x̃ and x̄ from x.
void refresh_fields(DesignState& state, const fea::DesignProblem& problem, const Neighborhoods& nb);

/// dF/dx = Hᵀ (dF/dx̄ ⊙ dx̄/dx̃), with H the normalised filter.
std::vector<double> chain_gradient(std::span<const double> d_dxbar, std::span<const double> projection_derivative,
                                   const Neighborhoods& nb);

struct VolumeResult {
  double value = 0.0;             ///< g = V(x̄)/V0 - f
  std::vector<double> gradient;   ///< dg/dx
};

VolumeResult volume_value_and_gradient(std::span<const double> x_projected,
                                       std::span<const double> projection_derivative, const Neighborhoods& nb,
                                       const fea::DesignProblem& problem);

struct ObjectiveResult {
  double compliance = 0.0;
  std::vector<double> gradient;  ///< dc/dx through filter and projection
};

/// Compliance of the design x and its full-chain gradient. Used by the loop
/// and by gradient checks.
ObjectiveResult compliance_of_design(const fea::DesignProblem& problem, const Neighborhoods& nb,
                                     std::span<const double> x, double beta, double eta,
                                     const fea::SimpParams& simp, fea::EquilibriumSolver& solver);

struct IterationReport {
  int iteration = 0;  ///< total iterations completed, including earlier runs
  double compliance = 0.0;
  double volume_fraction = 0.0;
  double change = 0.0;
};

/// Return false to stop the run after the current iteration.
using IterationObserver = std::function<bool(const IterationReport&)>;

/// MMA settings used by the topology loop. The move limit is much tighter than
/// the generic default: with the projection sharpness fixed at 25 from the first
/// iteration, larger moves flip elements across the threshold in one step.
inline MmaSettings topology_mma_settings() {
  MmaSettings s;
  s.move = 0.01;
  return s;
}

struct RunOptions {
  int max_iters = 1000;
  /// Half the topology move limit.
  double convergence_tol = 0.005;
  MmaSettings mma = topology_mma_settings();
  IterationObserver observer;
};

/// Iterates filter -> project -> solve -> gradients -> MMA until max_iters or
/// max|Δx| < convergence_tol. A fresh state is created when none is given;
/// the MMA memory is reset at the start of every call.
DesignState run_optimization(const fea::DesignProblem& problem, const RminMap& rmin,
                             std::optional<DesignState> state, const RunOptions& options);

}  // namespace hitop::topopt
