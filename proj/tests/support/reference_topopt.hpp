#pragma once

// Stand-alone reference topology optimiser used as an oracle. It shares no
// code with the library: quadrature stiffness, triplet assembly with a sparse
// LU solve, brute-force filter, and an MMA step whose single-constraint dual
// is solved by bisection on the multiplier. Elements are numbered column-major
// internally (88-line convention) and converted to row-major on output.

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace hitop::reference {

inline Eigen::Matrix<double, 8, 8> quadrature_ke(double nu) {
  Eigen::Matrix3d d;
  d << 1, nu, 0, nu, 1, 0, 0, 0, (1 - nu) / 2;
  d /= 1 - nu * nu;
  const double xi_n[4] = {-1, 1, 1, -1};
  const double eta_n[4] = {-1, -1, 1, 1};
  const double g = 1.0 / std::sqrt(3.0);
  Eigen::Matrix<double, 8, 8> k = Eigen::Matrix<double, 8, 8>::Zero();
  for (double xi : {-g, g}) {
    for (double eta : {-g, g}) {
      Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
      for (int i = 0; i < 4; ++i) {
        const double dx = 0.5 * xi_n[i] * (1 + eta * eta_n[i]);
        const double dy = 0.5 * eta_n[i] * (1 + xi * xi_n[i]);
        b(0, 2 * i) = dx;
        b(1, 2 * i + 1) = dy;
        b(2, 2 * i) = dy;
        b(2, 2 * i + 1) = dx;
      }
      k += b.transpose() * d * b * 0.25;
    }
  }
  return k;
}

struct MbbResult {
  std::vector<double> compliance;   // per iteration
  std::vector<double> xbar_rowmajor;
};

// MBB half beam, unit downward load at the top-left node, x-symmetry on the
// left edge, roller at the bottom-right node.
inline MbbResult mbb_reference(int nelx, int nely, double volfrac, double rmin, int iterations, double move,
                               double beta = 25.0, double eta = 0.5) {
  const int nel = nelx * nely;
  const int ndof = 2 * (nelx + 1) * (nely + 1);
  const double penal = 3.0, emin = 1e-9, e0 = 1.0;
  const auto ke = quadrature_ke(0.3);

  // 88-line edofMat: element (elx, ely) column-major, ely counted from the top.
  std::vector<std::array<int, 8>> edof(static_cast<std::size_t>(nel));
  for (int elx = 0; elx < nelx; ++elx) {
    for (int ely = 0; ely < nely; ++ely) {
      const int n1 = (nely + 1) * elx + ely;
      const int n2 = (nely + 1) * (elx + 1) + ely;
      edof[static_cast<std::size_t>(elx * nely + ely)] = {2 * n1 + 2, 2 * n1 + 3, 2 * n2 + 2, 2 * n2 + 3,
                                                          2 * n2,     2 * n2 + 1, 2 * n1,     2 * n1 + 1};
    }
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(ndof);
  f(1) = -1.0;
  std::vector<bool> fixed(static_cast<std::size_t>(ndof), false);
  for (int r = 0; r <= nely; ++r) fixed[static_cast<std::size_t>(2 * r)] = true;
  fixed[static_cast<std::size_t>(ndof - 1)] = true;
  std::vector<int> map(static_cast<std::size_t>(ndof), -1);
  int nfree = 0;
  for (int d = 0; d < ndof; ++d)
    if (!fixed[static_cast<std::size_t>(d)]) map[static_cast<std::size_t>(d)] = nfree++;

  // Filter weights, brute force; radius of the receiving element.
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nel, nel);
  for (int a = 0; a < nel; ++a) {
    const int ax = a / nely, ay = a % nely;
    for (int b = 0; b < nel; ++b) {
      const int bx = b / nely, by = b % nely;
      const double dist = std::hypot(ax - bx, ay - by);
      h(a, b) = std::max(0.0, rmin - dist);
    }
  }
  const Eigen::VectorXd hs = h.rowwise().sum();
  const Eigen::SparseMatrix<double> hsp = h.sparseView();

  auto proj = [&](double v) {
    return (std::tanh(beta * eta) + std::tanh(beta * (v - eta))) / (std::tanh(beta * eta) + std::tanh(beta * (1 - eta)));
  };
  auto dproj = [&](double v) {
    const double t = std::tanh(beta * (v - eta));
    return beta * (1 - t * t) / (std::tanh(beta * eta) + std::tanh(beta * (1 - eta)));
  };

  Eigen::VectorXd x = Eigen::VectorXd::Constant(nel, volfrac);
  Eigen::VectorXd xold1 = x, xold2 = x, low = x, upp = x;
  MbbResult out;
  Eigen::VectorXd xbar(nel);
  for (int loop = 0; loop < iterations; ++loop) {
    const Eigen::VectorXd xt = (hsp * x).cwiseQuotient(hs);
    Eigen::VectorXd dx(nel);
    for (int e = 0; e < nel; ++e) {
      xbar(e) = std::clamp(proj(xt(e)), 0.0, 1.0);
      dx(e) = dproj(xt(e));
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (int e = 0; e < nel; ++e) {
      const double ee = emin + std::pow(xbar(e), penal) * (e0 - emin);
      for (int i = 0; i < 8; ++i) {
        const int gi = map[static_cast<std::size_t>(edof[static_cast<std::size_t>(e)][i])];
        if (gi < 0) continue;
        for (int j = 0; j < 8; ++j) {
          const int gj = map[static_cast<std::size_t>(edof[static_cast<std::size_t>(e)][j])];
          if (gj < 0) continue;
          trip.emplace_back(gi, gj, ee * ke(i, j));
        }
      }
    }
    Eigen::SparseMatrix<double> k(nfree, nfree);
    k.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd ff(nfree);
    for (int d = 0; d < ndof; ++d)
      if (map[static_cast<std::size_t>(d)] >= 0) ff(map[static_cast<std::size_t>(d)]) = f(d);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(k);
    const Eigen::VectorXd uf = lu.solve(ff);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(ndof);
    for (int d = 0; d < ndof; ++d)
      if (map[static_cast<std::size_t>(d)] >= 0) u(d) = uf(map[static_cast<std::size_t>(d)]);

    double c = 0.0;
    Eigen::VectorXd dc(nel);
    for (int e = 0; e < nel; ++e) {
      Eigen::Matrix<double, 8, 1> ue;
      for (int i = 0; i < 8; ++i) ue(i) = u(edof[static_cast<std::size_t>(e)][i]);
      const double ce = ue.dot(ke * ue);
      c += (emin + std::pow(xbar(e), penal) * (e0 - emin)) * ce;
      dc(e) = -penal * std::pow(xbar(e), penal - 1) * (e0 - emin) * ce;
    }
    out.compliance.push_back(c);
    const Eigen::VectorXd dfx = hsp.transpose() * (dc.cwiseProduct(dx).cwiseQuotient(hs)) / c;
    const Eigen::VectorXd dgx = hsp.transpose() * (dx / nel).cwiseQuotient(hs);
    const double g = xbar.sum() / nel - volfrac;

    // MMA approximation with identical parameters.
    for (int j = 0; j < nel; ++j) {
      if (loop < 2) {
        low(j) = x(j) - 0.5;
        upp(j) = x(j) + 0.5;
      } else {
        const double s = (x(j) - xold1(j)) * (xold1(j) - xold2(j));
        const double gamma = s < 0 ? 0.7 : (s > 0 ? 1.2 : 1.0);
        low(j) = std::clamp(x(j) - gamma * (xold1(j) - low(j)), x(j) - 10.0, x(j) - 0.01);
        upp(j) = std::clamp(x(j) + gamma * (upp(j) - xold1(j)), x(j) + 0.01, x(j) + 10.0);
      }
    }
    Eigen::VectorXd alfa(nel), bet(nel), p0(nel), q0(nel), p1(nel), q1(nel);
    for (int j = 0; j < nel; ++j) {
      alfa(j) = std::max({0.0, 0.9 * low(j) + 0.1 * x(j), x(j) - move});
      bet(j) = std::min({1.0, 0.9 * upp(j) + 0.1 * x(j), x(j) + move});
      const double u2 = (upp(j) - x(j)) * (upp(j) - x(j));
      const double l2 = (x(j) - low(j)) * (x(j) - low(j));
      auto pq = [&](double gr, double& pp, double& qq) {
        const double extra = 0.001 * std::abs(gr) + 1e-5;
        pp = (std::max(gr, 0.0) + extra) * u2;
        qq = (std::max(-gr, 0.0) + extra) * l2;
      };
      pq(dfx(j), p0(j), q0(j));
      pq(dgx(j), p1(j), q1(j));
    }
    double rhs = 0.0;
    for (int j = 0; j < nel; ++j) rhs += p1(j) / (upp(j) - x(j)) + q1(j) / (x(j) - low(j));
    rhs -= g;
    auto primal = [&](double lam, Eigen::VectorXd& xn) {
      double con = 0.0;
      for (int j = 0; j < nel; ++j) {
        const double pp = std::sqrt(p0(j) + lam * p1(j));
        const double qq = std::sqrt(q0(j) + lam * q1(j));
        xn(j) = std::clamp((pp * low(j) + qq * upp(j)) / (pp + qq), alfa(j), bet(j));
        con += p1(j) / (upp(j) - xn(j)) + q1(j) / (xn(j) - low(j));
      }
      return con - rhs;
    };
    Eigen::VectorXd xn(nel);
    double lam_lo = 0.0, lam_hi = 1.0;
    if (primal(0.0, xn) > 0.0) {
      while (primal(lam_hi, xn) > 0.0 && lam_hi < 1e12) lam_hi *= 2.0;
      for (int it = 0; it < 200 && (lam_hi - lam_lo) > 1e-12 * lam_hi; ++it) {
        const double mid = 0.5 * (lam_lo + lam_hi);
        (primal(mid, xn) > 0.0 ? lam_lo : lam_hi) = mid;
      }
      primal(lam_hi, xn);
    }
    xold2 = xold1;
    xold1 = x;
    x = xn;
  }
  out.xbar_rowmajor.resize(static_cast<std::size_t>(nel));
  for (int elx = 0; elx < nelx; ++elx)
    for (int ely = 0; ely < nely; ++ely)
      out.xbar_rowmajor[static_cast<std::size_t>(ely * nelx + elx)] = xbar(elx * nely + ely);
  return out;
}

}  // namespace hitop::reference
