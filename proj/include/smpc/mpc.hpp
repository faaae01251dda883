#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smpc/model.hpp"
#include "smpc/polytope.hpp"
#include "smpc/qp.hpp"
#include "smpc/scenario.hpp"
#include "smpc/sets.hpp"

namespace smpc {

enum class Mode { Proposed, RfTube, Robust };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct ControllerGains {
  Eigen::MatrixXd K;
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  double cost_constant = 0.0;     ///< expected error cost over the horizon (reported only)
  double cost_constant_se = 0.0;  ///< its Monte-Carlo standard error
};

struct LqrResult {
  Eigen::MatrixXd K;  ///< u = K x
  Eigen::MatrixXd P;  ///< DARE solution
  int iterations = 0;
};

/// Riccati fixed-point iteration; throws Error(Numerical) if it fails to settle
/// (non-stabilizable pair) or the closed loop is not Schur.
LqrResult lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                   const Eigen::MatrixXd& R);

/// P = sum_i (A_cl')^i M A_cl^i; throws Error(Numerical) when A_cl is not Schur.
Eigen::MatrixXd dlyap(const Eigen::MatrixXd& Acl, const Eigen::MatrixXd& M);

double spectral_radius(const Eigen::MatrixXd& A);

struct CostConstant {
  double monte_carlo = 0.0;
  double standard_error = 0.0;
  std::optional<double> gaussian_closed_form;  ///< set for the untruncated gaussian law
};

/// c = E{ sum_{i<T} e_i'(Q + K'RK)e_i + e_T' P e_T }.
CostConstant cost_constant(const ControllerGains& gains, const LinearSystem& sys, const DisturbanceModel& dist, int T,
                           std::int64_t samples, std::uint64_t seed);

/// Worst-case (robust) or mixed one-step-stochastic (rf-tube) state and input offsets.
/// The returned Tightening has eta, mu and eta_first filled; terminal parts are
/// produced by baseline_terminal. With worst_case_inputs the rf-tube input rows
/// are tightened like the robust ones.
Tightening baseline_tightening(const LinearSystem& sys, const Eigen::MatrixXd& K, const ConstraintSpec& spec,
                               const DisturbanceModel& dist, Mode mode, const ScenarioOptions& opt,
                               bool worst_case_inputs = false);

TerminalTightening baseline_terminal(const LinearSystem& sys, const Eigen::MatrixXd& K, const Polytope& terminal_raw,
                                     double eps_T, int T, const DisturbanceModel& dist, Mode mode,
                                     const ScenarioOptions& opt);

/// How the robust comparison controller is built.
///  Tube: constraints tightened by an RPI error set S at every step, the first
///        nominal state is free with x - z0 in S, u = v0 + K (x - z0).
///  Tightening: the proposed machinery with l-step worst-case offsets.
enum class RobustForm { Tube, Tightening };

std::string to_string(RobustForm f);
RobustForm robust_form_from_string(const std::string& s);

struct BaselineOptions {
  RobustForm robust_form = RobustForm::Tube;
  bool rf_worst_case_inputs = true;  ///< rf-tube input rows tightened by the worst case
  double tube_alpha = 1e-4;          ///< accuracy of the RPI error set
};

struct SynthesisOptions {
  ScenarioOptions scenario;
  SetOptions sets;
  BaselineOptions baseline;
  std::int64_t cost_samples = 100000;
  bool allow_unbounded_region = false;  ///< accept an unbounded first-step region
};

struct SynthesisBundle {
  LinearSystem sys;
  DisturbanceModel dist;
  ConstraintSpec spec;
  ControllerGains gains;
  Tightening tight;
  SetBundle sets;
  Mode mode = Mode::Proposed;
  bool tube = false;  ///< robust mode in tube form; S below is then set
  Polytope S;         ///< RPI error set of the tube form
  int tube_terms = 0;
  bool region_bounded = true;
  std::string config_hash;
};

/// Offline pipeline: gains, tightenings, terminal set, T-step set and, for the
/// proposed mode, the robust control invariant first-step constraint. Baseline
/// modes use C_T itself as the first-step set.
SynthesisBundle synthesize(const LinearSystem& sys, const DisturbanceModel& dist, const ConstraintSpec& spec,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, Mode mode,
                           const SynthesisOptions& opt = {});

/// Condensed online program.
///
/// The decision is y = v = (v_0, ..., v_{T-1}), or y = (z_0, v) in tube form.
/// Cost: sum_{l<T} (z_l'Q z_l + v_l'R v_l) + z_T'P z_T with the nominal dynamics
/// substituted, written as 0.5 y'Hy + y'(F x) + x'Y x.
/// Rows: state (l = 1..T-1), input (l = 0..T-1), terminal, first-step; the tube
/// form adds state rows at l = 0 and the rows of x - z_0 in S.
class OnlineProgram {
 public:
  explicit OnlineProgram(const SynthesisBundle& bundle);

  QpProblem build(const Eigen::VectorXd& x) const;

  /// Full cost J_T without the constant c.
  double cost(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  /// Nominal states z_0..z_T.
  std::vector<Eigen::VectorXd> predict(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  /// Nominal input sequence contained in y.
  Eigen::VectorXd inputs(const Eigen::VectorXd& y) const { return y.tail(T_ * m_); }

  /// Input applied to the plant: v_0, plus K (x - z_0) in tube form, with any
  /// rounding-level excess over the hard input rows G u <= g projected away.
  Eigen::VectorXd applied_input(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  /// Candidate for time k+1 built from the time-k optimum y_prev at x_prev:
  /// z'_0 = x_next and v'_l = v*_{l+1} + K (z'_l - z*_{l+1}), v'_{T-1} = K z'_{T-1}.
  /// In tube form z'_0 = z*_1 and v' = (v*_1, ..., v*_{T-1}, K z*_T).
  Eigen::VectorXd shifted_candidate(const Eigen::VectorXd& x_prev, const Eigen::VectorXd& y_prev,
                                    const Eigen::VectorXd& x_next) const;

  int horizon() const { return T_; }
  int input_dim() const { return m_; }
  int decision_dim() const { return nz_ + T_ * m_; }
  bool tube() const { return nz_ > 0; }
  int constraint_rows() const { return static_cast<int>(Arow_.rows()); }

 private:
  int n_, m_, T_, nz_;
  Eigen::MatrixXd K_;
  Eigen::MatrixXd G_;
  Eigen::VectorXd g_;
  Eigen::MatrixXd Zy_;     // (T+1)n x dim: stacked z from y
  Eigen::MatrixXd Zx_;     // (T+1)n x n: stacked z from x
  Eigen::MatrixXd Hess_;
  Eigen::MatrixXd Lin_;    // dim x n
  Eigen::MatrixXd Const_;  // n x n
  Eigen::MatrixXd Arow_;   // rows x dim
  Eigen::VectorXd b0_;
  Eigen::MatrixXd Bx_;     // rows x n: rhs = b0 - Bx x
};

QpProblem build_online_qp(const SynthesisBundle& bundle, const Eigen::VectorXd& x);

struct StepResult {
  QpStatus status = QpStatus::NumericalFailure;
  Eigen::VectorXd u;                 ///< input to apply
  Eigen::VectorXd v0;                ///< first nominal input
  Eigen::VectorXd y;                 ///< optimal decision vector
  Eigen::VectorXd v;                 ///< whole optimal input sequence
  std::vector<Eigen::VectorXd> z;    ///< predicted nominal trajectory
  double value = 0.0;                ///< optimal J_T without c
};

/// Receding-horizon controller; one instance per closed-loop run.
class Controller {
 public:
  explicit Controller(const SynthesisBundle& bundle) : bundle_(&bundle), program_(bundle) {}

  StepResult step(const Eigen::VectorXd& x, bool warm_start = true);

  /// Is the decision y feasible for the program posed at x?
  bool is_feasible(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tol = 1e-8) const;

  const OnlineProgram& program() const { return program_; }
  const SynthesisBundle& bundle() const { return *bundle_; }

 private:
  const SynthesisBundle* bundle_;
  OnlineProgram program_;
  QpWarmStart warm_;
};

StepResult control_step(const SynthesisBundle& bundle, const Eigen::VectorXd& x, QpWarmStart* warm = nullptr);

}  // namespace smpc
