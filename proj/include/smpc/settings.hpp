#pragma once

namespace smpc {

/// Tolerances shared by the LP/QP solvers and the set algebra.
struct NumericSettings {
  double feas = 1e-8;   ///< primal feasibility of returned points
  double opt = 1e-7;    ///< optimality / KKT residual
  double pivot = 1e-10; ///< smallest admissible pivot and pricing threshold
  double redundancy = 1e-9;  ///< facet is redundant if max over the rest <= f_i + this
  double set_equal = 1e-9;   ///< fixed-point termination of set iterations
};

inline constexpr NumericSettings kTolerances{};

}  // namespace smpc
