#include "hitop/fea/problem.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "hitop/common/error.hpp"

namespace hitop::fea {

namespace {

void sort_unique(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

void DesignProblem::normalize() {
  sort_unique(fixed_dofs);
  sort_unique(passive_solid);
  sort_unique(passive_void);
}

void DesignProblem::validate() const {
  if (nelx < 1) throw ValidationError("nelx", "must be >= 1");
  if (nely < 1) throw ValidationError("nely", "must be >= 1");
  if (!(volfrac > 0.0 && volfrac < 1.0)) throw ValidationError("volfrac", "must lie in (0, 1)");
  if (!(poisson_ratio > -1.0 && poisson_ratio < 0.5)) throw ValidationError("nu", "must lie in (-1, 0.5)");
  if (fixed_dofs.empty()) throw ValidationError("fixed_dofs", "at least one constrained dof is required");
  if (loads.empty()) throw ValidationError("loads", "at least one load is required");

  const int ndof = dof_count();
  std::unordered_set<int> fixed;
  for (std::size_t i = 0; i < fixed_dofs.size(); ++i) {
    int d = fixed_dofs[i];
    if (d < 0 || d >= ndof)
      throw ValidationError("fixed_dofs/" + std::to_string(i), "dof " + std::to_string(d) + " out of range");
    fixed.insert(d);
  }
  for (std::size_t i = 0; i < loads.size(); ++i) {
    const auto& l = loads[i];
    if (l.dof < 0 || l.dof >= ndof)
      throw ValidationError("loads/" + std::to_string(i), "dof " + std::to_string(l.dof) + " out of range");
    if (!std::isfinite(l.value)) throw ValidationError("loads/" + std::to_string(i), "value must be finite");
    if (fixed.count(l.dof))
      throw ValidationError("loads/" + std::to_string(i), "load applied on fixed dof " + std::to_string(l.dof));
  }

  const int nel = element_count();
  std::unordered_set<int> solid;
  for (std::size_t i = 0; i < passive_solid.size(); ++i) {
    int e = passive_solid[i];
    if (e < 0 || e >= nel) throw ValidationError("passive_solid/" + std::to_string(i), "element out of range");
    solid.insert(e);
  }
  for (std::size_t i = 0; i < passive_void.size(); ++i) {
    int e = passive_void[i];
    if (e < 0 || e >= nel) throw ValidationError("passive_void/" + std::to_string(i), "element out of range");
    if (solid.count(e))
      throw ValidationError("passive_void/" + std::to_string(i),
                            "element " + std::to_string(e) + " is also passive solid");
  }
  if (reference_volume() <= 0.0) throw ValidationError("passive_void", "no design elements remain");
}

std::vector<ElementRole> element_roles(const DesignProblem& problem) {
  std::vector<ElementRole> roles(static_cast<std::size_t>(problem.element_count()), ElementRole::Design);
  for (int e : problem.passive_solid) roles[static_cast<std::size_t>(e)] = ElementRole::Solid;
  for (int e : problem.passive_void) roles[static_cast<std::size_t>(e)] = ElementRole::Void;
  return roles;
}

std::array<int, 8> element_dofs(int nelx, int nely, int e) noexcept {
  const int row = e / nelx;
  const int col = e % nelx;
  const int ll = node_id(nely, row + 1, col);
  const int lr = node_id(nely, row + 1, col + 1);
  const int ur = node_id(nely, row, col + 1);
  const int ul = node_id(nely, row, col);
  return {2 * ll, 2 * ll + 1, 2 * lr, 2 * lr + 1, 2 * ur, 2 * ur + 1, 2 * ul, 2 * ul + 1};
}

}  // namespace hitop::fea
