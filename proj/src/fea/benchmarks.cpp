#include "hitop/fea/benchmarks.hpp"

#include <cmath>

#include "hitop/common/error.hpp"

namespace hitop::fea {

DesignProblem mbb_beam(int nelx, int nely, double volfrac) {
  DesignProblem p;
  p.nelx = nelx;
  p.nely = nely;
  p.volfrac = volfrac;
  p.loads.push_back({dof_y(nely, 0, 0), -1.0});
  for (int r = 0; r <= nely; ++r) p.fixed_dofs.push_back(dof_x(nely, r, 0));
  p.fixed_dofs.push_back(dof_y(nely, nely, nelx));
  p.normalize();
  p.validate();
  return p;
}

DesignProblem l_bracket(int n, double cutout_fraction, double volfrac) {
  if (!(cutout_fraction > 0.0 && cutout_fraction < 1.0)) throw ParameterError("cutout fraction must lie in (0, 1)");
  const int cut = static_cast<int>(std::lround(cutout_fraction * n));
  if (cut < 1 || cut >= n) throw ParameterError("cutout does not fit the domain");
  const int leg = n - cut;  // width of the vertical leg and height of the horizontal arm

  DesignProblem p;
  p.nelx = n;
  p.nely = n;
  p.volfrac = volfrac;
  for (int r = 0; r < cut; ++r)
    for (int c = leg; c < n; ++c) p.passive_void.push_back(r * n + c);
  for (int c = 0; c <= leg; ++c) {
    p.fixed_dofs.push_back(dof_x(n, 0, c));
    p.fixed_dofs.push_back(dof_y(n, 0, c));
  }
  p.loads.push_back({dof_y(n, cut, n), -1.0});
  p.normalize();
  p.validate();
  return p;
}

DesignProblem cantilever(int nelx, int nely, double volfrac) {
  DesignProblem p;
  p.nelx = nelx;
  p.nely = nely;
  p.volfrac = volfrac;
  for (int r = 0; r <= nely; ++r) {
    p.fixed_dofs.push_back(dof_x(nely, r, 0));
    p.fixed_dofs.push_back(dof_y(nely, r, 0));
  }
  p.loads.push_back({dof_y(nely, nely / 2, nelx), -1.0});
  p.normalize();
  p.validate();
  return p;
}

}  // namespace hitop::fea
