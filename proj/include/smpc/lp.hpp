#pragma once

#include <Eigen/Dense>

#include "smpc/polytope.hpp"
#include "smpc/settings.hpp"

namespace smpc {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

/// maximize c' x subject to x in constraints.
struct LpProblem {
  Eigen::VectorXd c;
  Polytope constraints;
};

struct LpResult {
  LpStatus status = LpStatus::IterationLimit;
  Eigen::VectorXd x;       ///< optimal point (Optimal only)
  double value = 0.0;      ///< c' x (Optimal only)
  Eigen::VectorXd dual;    ///< y >= 0 with F' y = c and f' y = value (Optimal only)
  Eigen::VectorXd ray;     ///< F r <= 0, c' r > 0 (Unbounded only)
  double infeasibility = 0.0;  ///< min_x max_i (F_i x - f_i), > 0 when Infeasible
};

/// Dense simplex on the dual standard form  min f'y s.t. F'y = c, y >= 0.
///
/// The basis has size d (the number of variables), so each pivot costs
/// O(r d + d^3). Dantzig pricing falls back to Bland's rule after 10 r
/// consecutive degenerate pivots.
LpResult solve_lp(const Eigen::MatrixXd& F, const Eigen::VectorXd& f, const Eigen::VectorXd& c,
                  const NumericSettings& tol = kTolerances);

inline LpResult solve_lp(const LpProblem& p, const NumericSettings& tol = kTolerances) {
  return solve_lp(p.constraints.A(), p.constraints.b(), p.c, tol);
}

struct FeasibilityResult {
  bool feasible = false;
  Eigen::VectorXd x;  ///< minimizer of the worst violation (a deepest point when feasible)
  double max_violation = 0.0;
};

/// min_x max_i (F_i x - f_i), capped below at -1.
FeasibilityResult find_feasible_point(const Eigen::MatrixXd& F, const Eigen::VectorXd& f,
                                      const NumericSettings& tol = kTolerances);

}  // namespace smpc
