#pragma once

#include <Eigen/Dense>

#include "smpc/model.hpp"
#include "smpc/polytope.hpp"
#include "smpc/scenario.hpp"

namespace smpc {

struct IterationLog {
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;  ///< largest support gap between the last two iterates
};

struct SetBundle {
  Polytope X_T;        ///< robust positively invariant terminal set (x)
  Polytope Z_T;        ///< tightened terminal set (z)
  Polytope C_T;        ///< T-step set in (z, v0)
  Polytope C_T_inf;    ///< robust control invariant subset of C_T in (z, v0)
  Polytope C_T_inf_x;  ///< projection of C_T_inf onto z
  IterationLog terminal_log;
  IterationLog rci_log;
};

struct SetOptions {
  int max_iterations = 500;
  double tol = 1e-9;
};

/// Maximal robust positively invariant subset of {x : H A_cl x <= eta_1, G K x <= g}
/// under x+ = A_cl x + Bw w, w in W. Throws Error(Infeasible) on an empty result and
/// Error(Numerical) if the iteration cap is reached.
Polytope terminal_invariant(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::VectorXd& eta_first,
                            const ConstraintSpec& spec, const Polytope& W, IterationLog* log = nullptr,
                            const SetOptions& opt = {});

/// Feasible (z0, v0) pairs of the nominal T-step program under the tightened constraints.
Polytope t_step_set(const LinearSystem& sys, const ConstraintSpec& spec, const Tightening& tight);

/// Largest subset K of C (in (z, v)) such that every (z, v) in K has
/// A z + B v + Bw w in proj_z(K) for all w in W.
///
/// At the iteration cap the last iterate is returned with log->converged = false
/// when one further step moves it by at most 1e-6; otherwise Error(Numerical).
Polytope robust_control_invariant(const Polytope& C, const LinearSystem& sys, const Polytope& W,
                                  IterationLog* log = nullptr, const SetOptions& opt = {});

/// Outer RPI approximation of the minimal robust invariant set of
/// e+ = A_cl e + v, v in V: (1 - alpha)^-1 (V + A_cl V + ... + A_cl^{s-1} V) with
/// s the first power such that A_cl^s V is inside alpha V. V must contain the
/// origin in its interior. terms (optional) receives s.
Polytope minimal_rpi_outer(const Eigen::MatrixXd& Acl, const Polytope& V, double alpha = 1e-4,
                           int max_terms = 1000, int* terms = nullptr);

/// Projection of a (z, v) polytope onto its first n coordinates.
Polytope first_step_region(const Polytope& C_T_inf, int n);

/// One application of the robust predecessor map used by robust_control_invariant.
Polytope robust_control_step(const Polytope& K, const LinearSystem& sys, const Polytope& W);

}  // namespace smpc
