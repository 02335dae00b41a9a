#pragma once

#include <Eigen/Core>
#include <vector>

namespace hitop::topopt {

struct MmaSettings {
  double asymptote_init = 0.5;
  double asymptote_increase = 1.2;
  double asymptote_decrease = 0.7;
  double move = 0.2;
  double a0 = 1.0;
  double a = 0.0;       // same for every constraint
  double c = 1000.0;
  double d = 1.0;
};

/// Iterate history and asymptotes carried between updates.
struct MmaMemory {
  int iteration = 0;
  Eigen::VectorXd xold1;
  Eigen::VectorXd xold2;
  Eigen::VectorXd low;
  Eigen::VectorXd upp;

  void reset() { *this = MmaMemory{}; }
  bool operator==(const MmaMemory& o) const;
};

/// Constraint values g_i(x) <= 0 and their gradients (one row per constraint).
struct Constraints {
  Eigen::VectorXd values;
  Eigen::MatrixXd gradients;  // m x n
};

struct MmaStep {
  Eigen::VectorXd x;
  bool fallback = false;  ///< subproblem failed; x was kept inside the move box
};

/// One MMA update (Svanberg's subproblem, solved with a primal-dual interior
/// point method on the full KKT system). Bounds are per variable.
MmaStep mma_update(const Eigen::VectorXd& x, const Eigen::VectorXd& df0dx, const Constraints& constraints,
                   const Eigen::VectorXd& xmin, const Eigen::VectorXd& xmax, MmaMemory& memory,
                   const MmaSettings& settings = {});

}  // namespace hitop::topopt
