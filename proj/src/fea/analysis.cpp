#include "hitop/fea/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hitop/common/error.hpp"

namespace hitop::fea {

ElementStiffness element_stiffness_q4(double nu) {
  if (!(nu > -1.0 && nu < 0.5)) throw ParameterError("poisson ratio must lie in (-1, 0.5), got " + std::to_string(nu));
  // Closed-form Q4 stiffness (88-line layout); see the quadrature oracle in the tests.
  const double k[8] = {0.5 - nu / 6.0,       0.125 + nu / 8.0, -0.25 - nu / 12.0, -0.125 + 3.0 * nu / 8.0,
                       -0.25 + nu / 12.0,    -0.125 - nu / 8.0, nu / 6.0,          0.125 - 3.0 * nu / 8.0};
  const int pattern[8][8] = {{0, 1, 2, 3, 4, 5, 6, 7}, {1, 0, 7, 6, 5, 4, 3, 2}, {2, 7, 0, 5, 6, 3, 4, 1},
                             {3, 6, 5, 0, 7, 2, 1, 4}, {4, 5, 6, 7, 0, 1, 2, 3}, {5, 4, 3, 2, 1, 0, 7, 6},
                             {6, 3, 4, 1, 2, 7, 0, 5}, {7, 2, 1, 4, 3, 6, 5, 0}};
  ElementStiffness ke;
  const double scale = 1.0 / (1.0 - nu * nu);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) ke(i, j) = scale * k[pattern[i][j]];
  return ke;
}

double SimpParams::modulus(double x) const noexcept { return emin + std::pow(x, penalty) * (e0 - emin); }

double SimpParams::modulus_derivative(double x) const noexcept {
  return penalty * std::pow(x, penalty - 1.0) * (e0 - emin);
}

Eigen::VectorXd load_vector(const DesignProblem& problem) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(problem.dof_count());
  for (const auto& l : problem.loads) f[l.dof] += l.value;
  return f;
}

struct EquilibriumSolver::Impl {
  const DesignProblem* problem = nullptr;
  int nel = 0;
  int ndof = 0;
  std::vector<int> free_index;  // -1 for fixed dofs
  int nfree = 0;
  ElementStiffness ke;
  Eigen::VectorXd forces;
  Eigen::SparseMatrix<double> k_ff;  // lower triangle of the reduced stiffness
  std::vector<int> value_slot;       // nel * 64, -1 when the entry is not stored
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
  bool analysed = false;
  double residual = 0.0;
};

EquilibriumSolver::EquilibriumSolver(const DesignProblem& problem) : impl_(std::make_unique<Impl>()) {
  problem.validate();
  auto& m = *impl_;
  m.problem = &problem;
  m.nel = problem.element_count();
  m.ndof = problem.dof_count();
  m.ke = element_stiffness_q4(problem.poisson_ratio);
  m.forces = load_vector(problem);

  m.free_index.assign(static_cast<std::size_t>(m.ndof), 0);
  for (int d : problem.fixed_dofs) m.free_index[static_cast<std::size_t>(d)] = -1;
  int distinct_fixed = 0;
  for (int d = 0; d < m.ndof; ++d) {
    if (m.free_index[static_cast<std::size_t>(d)] < 0) {
      ++distinct_fixed;
    } else {
      m.free_index[static_cast<std::size_t>(d)] = m.nfree++;
    }
  }
  if (distinct_fixed < 3)
    throw AnalysisError("insufficient supports: " + std::to_string(distinct_fixed) +
                        " constrained dofs cannot suppress the 3 rigid-body modes");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(m.nel) * 36);
  for (int e = 0; e < m.nel; ++e) {
    auto dofs = element_dofs(problem.nelx, problem.nely, e);
    for (int i = 0; i < 8; ++i) {
      int gi = m.free_index[static_cast<std::size_t>(dofs[i])];
      if (gi < 0) continue;
      for (int j = 0; j < 8; ++j) {
        int gj = m.free_index[static_cast<std::size_t>(dofs[j])];
        if (gj < 0 || gi < gj) continue;
        triplets.emplace_back(gi, gj, 0.0);
      }
    }
  }
  m.k_ff.resize(m.nfree, m.nfree);
  m.k_ff.setFromTriplets(triplets.begin(), triplets.end());
  m.k_ff.makeCompressed();

  m.value_slot.assign(static_cast<std::size_t>(m.nel) * 64, -1);
  const int* outer = m.k_ff.outerIndexPtr();
  const int* inner = m.k_ff.innerIndexPtr();
  for (int e = 0; e < m.nel; ++e) {
    auto dofs = element_dofs(problem.nelx, problem.nely, e);
    for (int i = 0; i < 8; ++i) {
      int gi = m.free_index[static_cast<std::size_t>(dofs[i])];
      if (gi < 0) continue;
      for (int j = 0; j < 8; ++j) {
        int gj = m.free_index[static_cast<std::size_t>(dofs[j])];
        if (gj < 0 || gi < gj) continue;
        // column gj, row gi (column-major storage)
        const int* begin = inner + outer[gj];
        const int* end = inner + outer[gj + 1];
        const int* it = std::lower_bound(begin, end, gi);
        m.value_slot[static_cast<std::size_t>(e) * 64 + i * 8 + j] = static_cast<int>(it - inner);
      }
    }
  }
}

EquilibriumSolver::~EquilibriumSolver() = default;
EquilibriumSolver::EquilibriumSolver(EquilibriumSolver&&) noexcept = default;
EquilibriumSolver& EquilibriumSolver::operator=(EquilibriumSolver&&) noexcept = default;

const Eigen::VectorXd& EquilibriumSolver::forces() const noexcept { return impl_->forces; }
const ElementStiffness& EquilibriumSolver::element_stiffness() const noexcept { return impl_->ke; }
double EquilibriumSolver::last_residual_norm() const noexcept { return impl_->residual; }

DisplacementField EquilibriumSolver::solve(std::span<const double> element_moduli) {
  return solve(element_moduli, impl_->forces);
}

DisplacementField EquilibriumSolver::solve(std::span<const double> element_moduli, const Eigen::VectorXd& forces) {
  auto& m = *impl_;
  if (static_cast<int>(element_moduli.size()) != m.nel)
    throw ContractError("expected " + std::to_string(m.nel) + " element moduli, got " +
                        std::to_string(element_moduli.size()));
  if (forces.size() != m.ndof) throw ContractError("force vector length does not match dof count");
  for (double E : element_moduli)
    if (!(E > 0.0) || !std::isfinite(E)) throw ContractError("element moduli must be finite and > 0");

  double* values = m.k_ff.valuePtr();
  std::fill(values, values + m.k_ff.nonZeros(), 0.0);
  for (int e = 0; e < m.nel; ++e) {
    const double E = element_moduli[static_cast<std::size_t>(e)];
    const int* slots = m.value_slot.data() + static_cast<std::size_t>(e) * 64;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        int s = slots[i * 8 + j];
        if (s >= 0) values[s] += E * m.ke(i, j);
      }
  }

  if (!m.analysed) {
    m.ldlt.analyzePattern(m.k_ff);
    m.analysed = true;
  }
  m.ldlt.factorize(m.k_ff);
  if (m.ldlt.info() != Eigen::Success) throw AnalysisError("stiffness factorisation failed: reduced system is singular");
  const Eigen::VectorXd& d = m.ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  const double dmin = d.minCoeff();
  if (!(dmin > 1e-13 * dmax))
    throw AnalysisError(
        "insufficient supports: reduced stiffness is singular (pivot ratio " + std::to_string(dmin / dmax) +
        "); the fixed dofs do not restrain every rigid-body mode");

  Eigen::VectorXd f_free(m.nfree);
  for (int dof = 0; dof < m.ndof; ++dof) {
    int fi = m.free_index[static_cast<std::size_t>(dof)];
    if (fi >= 0) f_free[fi] = forces[dof];
  }
  Eigen::VectorXd u_free = m.ldlt.solve(f_free);
  Eigen::VectorXd r = m.k_ff.selfadjointView<Eigen::Lower>() * u_free - f_free;
  m.residual = r.norm();

  DisplacementField out;
  out.values = Eigen::VectorXd::Zero(m.ndof);
  for (int dof = 0; dof < m.ndof; ++dof) {
    int fi = m.free_index[static_cast<std::size_t>(dof)];
    if (fi >= 0) out.values[dof] = u_free[fi];
  }
  return out;
}

DisplacementField solve_equilibrium(const DesignProblem& problem, std::span<const double> element_moduli) {
  EquilibriumSolver solver(problem);
  return solver.solve(element_moduli);
}

std::vector<double> element_strain_energies(const DesignProblem& problem, const DisplacementField& displacement,
                                            const ElementStiffness& k0) {
  const int nel = problem.element_count();
  if (displacement.values.size() != problem.dof_count())
    throw ContractError("displacement length does not match the mesh");
  std::vector<double> energy(static_cast<std::size_t>(nel));
  Eigen::Matrix<double, 8, 1> ue;
  for (int e = 0; e < nel; ++e) {
    auto dofs = element_dofs(problem.nelx, problem.nely, e);
    for (int i = 0; i < 8; ++i) ue[i] = displacement.values[dofs[i]];
    energy[static_cast<std::size_t>(e)] = ue.dot(k0 * ue);
  }
  return energy;
}

ComplianceResult compliance_and_gradient(const DesignProblem& problem, std::span<const double> densities,
                                         const DisplacementField& displacement, const SimpParams& simp) {
  const int nel = problem.element_count();
  if (static_cast<int>(densities.size()) != nel)
    throw ContractError("density vector has " + std::to_string(densities.size()) + " entries, mesh has " +
                        std::to_string(nel) + " elements");
  const ElementStiffness k0 = element_stiffness_q4(problem.poisson_ratio);
  auto energy = element_strain_energies(problem, displacement, k0);
  ComplianceResult out;
  out.gradient.resize(static_cast<std::size_t>(nel));
  for (int e = 0; e < nel; ++e) {
    const auto i = static_cast<std::size_t>(e);
    out.compliance += simp.modulus(densities[i]) * energy[i];
    out.gradient[i] = -simp.modulus_derivative(densities[i]) * energy[i];
  }
  return out;
}

}  // namespace hitop::fea
