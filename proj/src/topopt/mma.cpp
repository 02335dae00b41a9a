#include "hitop/topopt/mma.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "hitop/common/error.hpp"

namespace hitop::topopt {

bool MmaMemory::operator==(const MmaMemory& o) const {
  auto eq = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() && (a.size() == 0 || a == b);
  };
  return iteration == o.iteration && eq(xold1, o.xold1) && eq(xold2, o.xold2) && eq(low, o.low) && eq(upp, o.upp);
}

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Subproblem {
  Vec low, upp, alfa, beta;
  Vec p0, q0;
  Mat P, Q;  // m x n
  Vec b;
  double a0;
  Vec a, c, d;
};

struct Point {
  Vec x, y;
  double z;
  Vec lam, xsi, eta, mu;
  double zet;
  Vec s;
};

Vec residual(const Subproblem& sp, const Point& p, double epsi) {
  const Eigen::Index n = p.x.size();
  const Eigen::Index m = p.y.size();
  const Vec ux1 = sp.upp - p.x;
  const Vec xl1 = p.x - sp.low;
  const Vec ux2 = ux1.cwiseProduct(ux1);
  const Vec xl2 = xl1.cwiseProduct(xl1);
  const Vec plam = sp.p0 + sp.P.transpose() * p.lam;
  const Vec qlam = sp.q0 + sp.Q.transpose() * p.lam;
  const Vec gvec = sp.P * ux1.cwiseInverse() + sp.Q * xl1.cwiseInverse();
  const Vec dpsidx = plam.cwiseQuotient(ux2) - qlam.cwiseQuotient(xl2);

  Vec r(3 * n + 4 * m + 2);
  Eigen::Index k = 0;
  r.segment(k, n) = dpsidx - p.xsi + p.eta; k += n;
  r.segment(k, m) = sp.c + sp.d.cwiseProduct(p.y) - p.mu - p.lam; k += m;
  r(k++) = sp.a0 - p.zet - sp.a.dot(p.lam);
  r.segment(k, m) = gvec - sp.a * p.z - p.y + p.s - sp.b; k += m;
  r.segment(k, n) = p.xsi.cwiseProduct(p.x - sp.alfa).array() - epsi; k += n;
  r.segment(k, n) = p.eta.cwiseProduct(sp.beta - p.x).array() - epsi; k += n;
  r.segment(k, m) = p.mu.cwiseProduct(p.y).array() - epsi; k += m;
  r(k++) = p.zet * p.z - epsi;
  r.segment(k, m) = p.lam.cwiseProduct(p.s).array() - epsi;
  return r;
}

double max_ratio(const Vec& step, const Vec& value, double factor) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < step.size(); ++i) best = std::max(best, factor * step(i) / value(i));
  return best;
}

Point solve_subproblem(const Subproblem& sp, Eigen::Index n, Eigen::Index m) {
  constexpr double epsimin = 1e-7;
  Point p;
  p.x = 0.5 * (sp.alfa + sp.beta);
  p.y = Vec::Ones(m);
  p.z = 1.0;
  p.lam = Vec::Ones(m);
  p.xsi = (p.x - sp.alfa).cwiseInverse().cwiseMax(1.0);
  p.eta = (sp.beta - p.x).cwiseInverse().cwiseMax(1.0);
  p.mu = (0.5 * sp.c).cwiseMax(1.0);
  p.zet = 1.0;
  p.s = Vec::Ones(m);

  double epsi = 1.0;
  while (epsi > epsimin) {
    Vec res = residual(sp, p, epsi);
    double resnorm = res.norm();
    double resmax = res.cwiseAbs().maxCoeff();
    int outer = 0;
    while (resmax > 0.9 * epsi && outer < 200) {
      ++outer;
      const Vec ux1 = sp.upp - p.x;
      const Vec xl1 = p.x - sp.low;
      const Vec ux2 = ux1.cwiseProduct(ux1);
      const Vec xl2 = xl1.cwiseProduct(xl1);
      const Vec ux3 = ux1.cwiseProduct(ux2);
      const Vec xl3 = xl1.cwiseProduct(xl2);
      const Vec plam = sp.p0 + sp.P.transpose() * p.lam;
      const Vec qlam = sp.q0 + sp.Q.transpose() * p.lam;
      const Vec gvec = sp.P * ux1.cwiseInverse() + sp.Q * xl1.cwiseInverse();
      const Mat GG = sp.P * ux2.cwiseInverse().asDiagonal() - sp.Q * xl2.cwiseInverse().asDiagonal();
      const Vec dpsidx = plam.cwiseQuotient(ux2) - qlam.cwiseQuotient(xl2);
      const Vec xa = p.x - sp.alfa;
      const Vec bx = sp.beta - p.x;

      const Vec delx = dpsidx - (epsi * xa.cwiseInverse()) + (epsi * bx.cwiseInverse());
      const Vec dely = sp.c + sp.d.cwiseProduct(p.y) - p.lam - epsi * p.y.cwiseInverse();
      const double delz = sp.a0 - sp.a.dot(p.lam) - epsi / p.z;
      const Vec dellam = gvec - sp.a * p.z - p.y - sp.b + epsi * p.lam.cwiseInverse();
      const Vec diagx = 2.0 * (plam.cwiseQuotient(ux3) + qlam.cwiseQuotient(xl3)) + p.xsi.cwiseQuotient(xa) +
                        p.eta.cwiseQuotient(bx);
      const Vec diagxinv = diagx.cwiseInverse();
      const Vec diagy = sp.d + p.mu.cwiseQuotient(p.y);
      const Vec diagyinv = diagy.cwiseInverse();
      const Vec diaglamyi = p.s.cwiseQuotient(p.lam) + diagyinv;

      // Reduced (m+1) x (m+1) system in (dlam, dz).
      Mat AA(m + 1, m + 1);
      AA.topLeftCorner(m, m) = Mat(diaglamyi.asDiagonal()) + GG * diagxinv.asDiagonal() * GG.transpose();
      AA.topRightCorner(m, 1) = sp.a;
      AA.bottomLeftCorner(1, m) = sp.a.transpose();
      AA(m, m) = -p.zet / p.z;
      Vec bb(m + 1);
      bb.head(m) = dellam + dely.cwiseQuotient(diagy) - GG * delx.cwiseQuotient(diagx);
      bb(m) = delz;
      const Vec sol = AA.partialPivLu().solve(bb);
      const Vec dlam = sol.head(m);
      const double dz = sol(m);
      const Vec dx = -delx.cwiseQuotient(diagx) - (GG.transpose() * dlam).cwiseQuotient(diagx);
      const Vec dy = -dely.cwiseQuotient(diagy) + dlam.cwiseQuotient(diagy);
      const Vec dxsi = -p.xsi + epsi * xa.cwiseInverse() - p.xsi.cwiseProduct(dx).cwiseQuotient(xa);
      const Vec deta = -p.eta + epsi * bx.cwiseInverse() + p.eta.cwiseProduct(dx).cwiseQuotient(bx);
      const Vec dmu = -p.mu + epsi * p.y.cwiseInverse() - p.mu.cwiseProduct(dy).cwiseQuotient(p.y);
      const double dzet = -p.zet + epsi / p.z - p.zet * dz / p.z;
      const Vec ds = -p.s + epsi * p.lam.cwiseInverse() - p.s.cwiseProduct(dlam).cwiseQuotient(p.lam);

      double stm = 1.0;
      stm = std::max(stm, max_ratio(dy, p.y, -1.01));
      stm = std::max(stm, -1.01 * dz / p.z);
      stm = std::max(stm, max_ratio(dlam, p.lam, -1.01));
      stm = std::max(stm, max_ratio(dxsi, p.xsi, -1.01));
      stm = std::max(stm, max_ratio(deta, p.eta, -1.01));
      stm = std::max(stm, max_ratio(dmu, p.mu, -1.01));
      stm = std::max(stm, -1.01 * dzet / p.zet);
      stm = std::max(stm, max_ratio(ds, p.s, -1.01));
      stm = std::max(stm, max_ratio(dx, xa, -1.01));
      stm = std::max(stm, max_ratio(dx, bx, 1.01));
      double step = 1.0 / stm;

      const Point old = p;
      double resnew = 2.0 * resnorm;
      int inner = 0;
      while (resnew > resnorm && inner < 50) {
        ++inner;
        p.x = old.x + step * dx;
        p.y = old.y + step * dy;
        p.z = old.z + step * dz;
        p.lam = old.lam + step * dlam;
        p.xsi = old.xsi + step * dxsi;
        p.eta = old.eta + step * deta;
        p.mu = old.mu + step * dmu;
        p.zet = old.zet + step * dzet;
        p.s = old.s + step * ds;
        res = residual(sp, p, epsi);
        resnew = res.norm();
        step *= 0.5;
      }
      resnorm = resnew;
      resmax = res.cwiseAbs().maxCoeff();
    }
    epsi *= 0.1;
  }
  return p;
}

}  // namespace

MmaStep mma_update(const Eigen::VectorXd& x, const Eigen::VectorXd& df0dx, const Constraints& constraints,
                   const Eigen::VectorXd& xmin, const Eigen::VectorXd& xmax, MmaMemory& memory,
                   const MmaSettings& settings) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = constraints.values.size();
  if (df0dx.size() != n || xmin.size() != n || xmax.size() != n || constraints.gradients.rows() != m ||
      (m > 0 && constraints.gradients.cols() != n))
    throw ContractError("mma_update: inconsistent sizes");
  if (n == 0) return {x, false};
  if (!df0dx.allFinite() || !constraints.values.allFinite() || !constraints.gradients.allFinite())
    throw ContractError("mma_update: non-finite gradient");
  if ((xmax.array() <= xmin.array()).any()) throw ContractError("mma_update: empty variable bounds");

  const Vec range = xmax - xmin;
  Subproblem sp;
  sp.low.resize(n);
  sp.upp.resize(n);
  if (memory.iteration < 2 || memory.xold1.size() != n || memory.xold2.size() != n) {
    sp.low = x - settings.asymptote_init * range;
    sp.upp = x + settings.asymptote_init * range;
  } else {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double sign = (x(j) - memory.xold1(j)) * (memory.xold1(j) - memory.xold2(j));
      double gamma = 1.0;
      if (sign < 0.0) gamma = settings.asymptote_decrease;
      else if (sign > 0.0) gamma = settings.asymptote_increase;
      double lo = x(j) - gamma * (memory.xold1(j) - memory.low(j));
      double up = x(j) + gamma * (memory.upp(j) - memory.xold1(j));
      lo = std::clamp(lo, x(j) - 10.0 * range(j), x(j) - 0.01 * range(j));
      up = std::clamp(up, x(j) + 0.01 * range(j), x(j) + 10.0 * range(j));
      sp.low(j) = lo;
      sp.upp(j) = up;
    }
  }

  sp.alfa = (0.9 * sp.low + 0.1 * x).cwiseMax(x - settings.move * range).cwiseMax(xmin);
  sp.beta = (0.9 * sp.upp + 0.1 * x).cwiseMin(x + settings.move * range).cwiseMin(xmax);

  const Vec ux2 = (sp.upp - x).cwiseProduct(sp.upp - x);
  const Vec xl2 = (x - sp.low).cwiseProduct(x - sp.low);
  const Vec xmamiinv = range.cwiseMax(1e-5).cwiseInverse();
  auto split = [&](const Vec& grad, Vec& pv, Vec& qv) {
    const Vec pos = grad.cwiseMax(0.0);
    const Vec neg = (-grad).cwiseMax(0.0);
    const Vec extra = 0.001 * (pos + neg) + 1e-5 * xmamiinv;
    pv = (pos + extra).cwiseProduct(ux2);
    qv = (neg + extra).cwiseProduct(xl2);
  };
  split(df0dx, sp.p0, sp.q0);
  sp.P.resize(m, n);
  sp.Q.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    Vec pi, qi;
    split(constraints.gradients.row(i).transpose(), pi, qi);
    sp.P.row(i) = pi.transpose();
    sp.Q.row(i) = qi.transpose();
  }
  sp.b = sp.P * (sp.upp - x).cwiseInverse() + sp.Q * (x - sp.low).cwiseInverse() - constraints.values;
  sp.a0 = settings.a0;
  sp.a = Vec::Constant(m, settings.a);
  sp.c = Vec::Constant(m, settings.c);
  sp.d = Vec::Constant(m, settings.d);

  MmaStep out;
  Point p = solve_subproblem(sp, n, m);
  if (!p.x.allFinite()) {
    spdlog::error("mma_update: subproblem failed at iteration {}; keeping the design inside the move box",
                  memory.iteration);
    out.x = x.cwiseMax(sp.alfa).cwiseMin(sp.beta);
    out.fallback = true;
  } else {
    out.x = p.x.cwiseMax(sp.alfa).cwiseMin(sp.beta);
  }

  memory.xold2 = memory.xold1.size() == n ? memory.xold1 : x;
  memory.xold1 = x;
  memory.low = sp.low;
  memory.upp = sp.upp;
  ++memory.iteration;
  return out;
}

}  // namespace hitop::topopt
