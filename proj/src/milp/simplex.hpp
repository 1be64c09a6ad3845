#pragma once

#include <Eigen/Dense>

namespace qsynth::milp::detail {

/// min cost.x  s.t.  row_lo <= A x <= row_hi,  col_lo <= x <= col_hi.
/// All bounds must be finite.
struct LpProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd row_lo;
  Eigen::VectorXd row_hi;
  Eigen::VectorXd col_lo;
  Eigen::VectorXd col_hi;
  Eigen::VectorXd cost;
};

struct LpResult {
  bool feasible = false;
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
};

struct LpOptions {
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
};

/// Bounded-variable primal simplex on a dense tableau with a composite
/// (sum of infeasibilities) first phase and a Harris ratio test. Throws
/// SolverError when the pivot cap is exceeded.
LpResult solve_lp(const LpProblem& lp, const LpOptions& options);

}  // namespace qsynth::milp::detail
