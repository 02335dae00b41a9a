#include "hitop/topopt/optimizer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "hitop/common/error.hpp"

namespace hitop::topopt {

using fea::ElementRole;

DesignState initial_state(const fea::DesignProblem& problem, const RminMap& rmin) {
  problem.validate();
  DesignState s;
  s.nelx = problem.nelx;
  s.nely = problem.nely;
  const auto roles = fea::element_roles(problem);
  // Uniform start whose projected density equals the volume fraction.
  const double start = heaviside_inverse(problem.volfrac, s.beta, s.eta);
  s.x.resize(roles.size());
  for (std::size_t e = 0; e < roles.size(); ++e)
    s.x[e] = roles[e] == ElementRole::Solid ? 1.0 : roles[e] == ElementRole::Void ? 0.0 : start;
  refresh_fields(s, problem, build_neighborhoods(problem.nelx, problem.nely, rmin));
  return s;
}

Projection project_densities(std::span<const double> xt, std::span<const ElementRole> roles, double beta,
                             double eta) {
  if (xt.size() != roles.size()) throw ContractError("projection input does not match the mesh");
  Projection p{heaviside_project(xt, beta, eta), heaviside_gradient(xt, beta, eta)};
  for (std::size_t e = 0; e < roles.size(); ++e) {
    if (roles[e] == ElementRole::Design) continue;
    p.values[e] = roles[e] == ElementRole::Solid ? 1.0 : 0.0;
    p.derivative[e] = 0.0;
  }
  return p;
}

void refresh_fields(DesignState& state, const fea::DesignProblem& problem, const Neighborhoods& nb) {
  const auto roles = fea::element_roles(problem);
  state.x_filtered = density_filter(state.x, nb);
  for (auto& v : state.x_filtered) v = std::clamp(v, 0.0, 1.0);
  state.x_projected = project_densities(state.x_filtered, roles, state.beta, state.eta).values;
}

std::vector<double> chain_gradient(std::span<const double> d_dxbar, std::span<const double> dproj,
                                   const Neighborhoods& nb) {
  if (d_dxbar.size() != dproj.size() || static_cast<int>(d_dxbar.size()) != nb.element_count())
    throw ContractError("chain_gradient: inconsistent sizes");
  std::vector<double> v(d_dxbar.size());
  for (std::size_t e = 0; e < v.size(); ++e) v[e] = d_dxbar[e] * dproj[e];
  return filter_transpose(v, nb);
}

VolumeResult volume_value_and_gradient(std::span<const double> xbar, std::span<const double> dproj,
                                       const Neighborhoods& nb, const fea::DesignProblem& problem) {
  const auto roles = fea::element_roles(problem);
  if (xbar.size() != roles.size()) throw ContractError("volume: density size does not match the mesh");
  const double v0 = problem.reference_volume();
  double volume = 0.0;
  std::vector<double> dv(xbar.size(), 0.0);
  for (std::size_t e = 0; e < xbar.size(); ++e) {
    if (roles[e] == ElementRole::Void) continue;
    volume += xbar[e];
    dv[e] = 1.0 / v0;
  }
  return {volume / v0 - problem.volfrac, chain_gradient(dv, dproj, nb)};
}

ObjectiveResult compliance_of_design(const fea::DesignProblem& problem, const Neighborhoods& nb,
                                     std::span<const double> x, double beta, double eta,
                                     const fea::SimpParams& simp, fea::EquilibriumSolver& solver) {
  const auto roles = fea::element_roles(problem);
  std::vector<double> xt = density_filter(x, nb);
  const Projection proj = project_densities(xt, roles, beta, eta);
  std::vector<double> moduli(proj.values.size());
  for (std::size_t e = 0; e < moduli.size(); ++e) moduli[e] = simp.modulus(proj.values[e]);
  const auto u = solver.solve(moduli);
  const auto cg = fea::compliance_and_gradient(problem, proj.values, u, simp);
  return {cg.compliance, chain_gradient(cg.gradient, proj.derivative, nb)};
}

DesignState run_optimization(const fea::DesignProblem& problem, const RminMap& rmin,
                             std::optional<DesignState> initial, const RunOptions& options) {
  problem.validate();
  if (options.max_iters < 0) throw ParameterError("max_iters must be >= 0");
  if (!(options.convergence_tol >= 0.0)) throw ParameterError("convergence_tol must be >= 0");
  if (rmin.nelx() != problem.nelx || rmin.nely() != problem.nely)
    throw ContractError("rmin map does not match the problem mesh");

  DesignState state = initial ? std::move(*initial) : initial_state(problem, rmin);
  if (state.nelx != problem.nelx || state.nely != problem.nely ||
      state.x.size() != static_cast<std::size_t>(problem.element_count()))
    throw ContractError("design state does not match the problem mesh");
  if (options.max_iters == 0) return state;

  const auto roles = fea::element_roles(problem);
  const Neighborhoods nb = build_neighborhoods(problem.nelx, problem.nely, rmin);
  fea::EquilibriumSolver solver(problem);

  std::vector<int> design;
  for (std::size_t e = 0; e < roles.size(); ++e)
    if (roles[e] == ElementRole::Design) design.push_back(static_cast<int>(e));
  const auto nd = static_cast<Eigen::Index>(design.size());

  state.mma.reset();
  state.converged = false;
  refresh_fields(state, problem, nb);

  for (int it = 0; it < options.max_iters; ++it) {
    const ObjectiveResult obj =
        compliance_of_design(problem, nb, state.x, state.beta, state.eta, state.simp, solver);
    const Projection proj = project_densities(state.x_filtered, roles, state.beta, state.eta);
    const VolumeResult vol = volume_value_and_gradient(proj.values, proj.derivative, nb, problem);
    if (!std::isfinite(obj.compliance)) throw AnalysisError("compliance is not finite");

    Eigen::VectorXd xv(nd), df(nd), lo(nd), hi(nd);
    Constraints cons;
    cons.values = Eigen::VectorXd::Constant(1, vol.value);
    cons.gradients.resize(1, nd);
    const double scale = obj.compliance > 0.0 ? 1.0 / obj.compliance : 1.0;
    for (Eigen::Index k = 0; k < nd; ++k) {
      const auto e = static_cast<std::size_t>(design[static_cast<std::size_t>(k)]);
      xv(k) = state.x[e];
      df(k) = obj.gradient[e] * scale;
      cons.gradients(0, k) = vol.gradient[e];
      lo(k) = 0.0;
      hi(k) = 1.0;
    }
    const MmaStep step = mma_update(xv, df, cons, lo, hi, state.mma, options.mma);

    double change = 0.0;
    for (Eigen::Index k = 0; k < nd; ++k) {
      const auto e = static_cast<std::size_t>(design[static_cast<std::size_t>(k)]);
      const double next = std::clamp(step.x(k), 0.0, 1.0);
      change = std::max(change, std::abs(next - state.x[e]));
      state.x[e] = next;
    }
    refresh_fields(state, problem, nb);
    state.compliance_history.push_back(obj.compliance);
    ++state.iteration;
    state.last_change = change;

    const IterationReport report{state.iteration, obj.compliance, vol.value + problem.volfrac, change};
    spdlog::debug("it {:4d}  c {:.6g}  vol {:.4f}  change {:.4f}", report.iteration, report.compliance,
                  report.volume_fraction, change);
    const bool keep_going = !options.observer || options.observer(report);
    if (change < options.convergence_tol) {
      state.converged = true;
      break;
    }
    if (!keep_going) break;
  }
  return state;
}

}  // namespace hitop::topopt
