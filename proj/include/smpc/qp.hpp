#pragma once

#include <Eigen/Dense>

#include <vector>

#include "smpc/polytope.hpp"
#include "smpc/settings.hpp"

namespace smpc {

/// minimize 0.5 x' Hess x + lin' x  subject to  x in constraints (inequalities only).
struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  Polytope constraints;
};

enum class QpStatus { Optimal, Infeasible, NumericalFailure };

struct QpResult {
  QpStatus status = QpStatus::NumericalFailure;
  Eigen::VectorXd x;
  double value = 0.0;
  std::vector<int> active_set;   ///< working set at termination, ascending
  Eigen::VectorXd multipliers;   ///< one per constraint row, zero off the active set
  int iterations = 0;
};

/// Caller-owned warm-start record; holds the working set of the last solve.
struct QpWarmStart {
  std::vector<int> working_set;
};

/// Primal active-set method with a Cholesky-factored Hessian.
///
/// A feasible start comes from the phase-1 LP (or from the warm-start working
/// set when its equality-constrained minimizer is feasible). Iterations are
/// capped at 100 (d + r).
QpResult solve_qp(const QpProblem& p, QpWarmStart* warm = nullptr,
                  const NumericSettings& tol = kTolerances);

double qp_objective(const QpProblem& p, const Eigen::VectorXd& x);

}  // namespace smpc
