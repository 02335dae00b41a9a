#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <memory>
#include <span>
#include <vector>

#include "hitop/fea/problem.hpp"

namespace hitop::fea {

using ElementStiffness = Eigen::Matrix<double, 8, 8>;

/// Bilinear quadrilateral stiffness for a unit square, unit thickness, E = 1,
/// plane stress. Throws ParameterError unless -1 < nu < 0.5.
ElementStiffness element_stiffness_q4(double poisson_ratio);

struct DisplacementField {
  Eigen::VectorXd values;
};

/// SIMP interpolation E(x) = Emin + x^p (E0 - Emin).
struct SimpParams {
  double penalty = 3.0;
  double e0 = 1.0;
  double emin = 1e-9;

  double modulus(double density) const noexcept;
  double modulus_derivative(double density) const noexcept;
};

/// Reusable solver for one problem: the sparsity pattern and the symbolic
/// factorisation are computed once, each `solve` refactorises numerically.
class EquilibriumSolver {
 public:
  explicit EquilibriumSolver(const DesignProblem& problem);
  ~EquilibriumSolver();
  EquilibriumSolver(EquilibriumSolver&&) noexcept;
  EquilibriumSolver& operator=(EquilibriumSolver&&) noexcept;

  /// Solves K(E) U = F with fixed dofs eliminated. Every modulus must be > 0.
  DisplacementField solve(std::span<const double> element_moduli);

  /// Solves against an explicit right-hand side (length dof_count()).
  DisplacementField solve(std::span<const double> element_moduli, const Eigen::VectorXd& forces);

  const Eigen::VectorXd& forces() const noexcept;
  const ElementStiffness& element_stiffness() const noexcept;
  /// ||K_ff U_f - F_f|| of the most recent solve.
  double last_residual_norm() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper around EquilibriumSolver.
DisplacementField solve_equilibrium(const DesignProblem& problem, std::span<const double> element_moduli);

/// Global load vector assembled from the problem's point loads.
Eigen::VectorXd load_vector(const DesignProblem& problem);

struct ComplianceResult {
  double compliance = 0.0;
  std::vector<double> gradient;  ///< dc / dx̄ per element
};

/// c = sum_e E(x̄_e) u_e^T k0 u_e and its (self-adjoint) derivative.
ComplianceResult compliance_and_gradient(const DesignProblem& problem, std::span<const double> densities,
                                         const DisplacementField& displacement, const SimpParams& simp);

/// u_e^T k0 u_e for every element.
std::vector<double> element_strain_energies(const DesignProblem& problem, const DisplacementField& displacement,
                                            const ElementStiffness& k0);

}  // namespace hitop::fea
