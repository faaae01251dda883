#include "smpc/mpc.hpp"

#include "smpc/errors.hpp"

namespace smpc {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Proposed: return "proposed";
    case Mode::RfTube: return "rf-tube";
    case Mode::Robust: return "robust";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "proposed") return Mode::Proposed;
  if (s == "rf-tube") return Mode::RfTube;
  if (s == "robust") return Mode::Robust;
  throw Error(ErrorKind::Config, "mpc", "unknown mode '" + s + "' (expected proposed, rf-tube or robust)");
}

std::string to_string(RobustForm f) { return f == RobustForm::Tube ? "tube" : "tightening"; }

RobustForm robust_form_from_string(const std::string& s) {
  if (s == "tube") return RobustForm::Tube;
  if (s == "tightening") return RobustForm::Tightening;
  throw Error(ErrorKind::Config, "mpc", "unknown robust form '" + s + "' (expected tube or tightening)");
}

namespace {

void validate_weights(const LinearSystem& sys, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
  if (Q.rows() != sys.n() || Q.cols() != sys.n() || R.rows() != sys.m() || R.cols() != sys.m())
    throw Error(ErrorKind::Config, "mpc", "Q must be n x n and R m x m");
  if (!Q.isApprox(Q.transpose()) || !R.isApprox(R.transpose()) || Q.llt().info() != Eigen::Success ||
      R.llt().info() != Eigen::Success)
    throw Error(ErrorKind::Config, "mpc", "Q and R must be symmetric positive definite");
}

Polytope state_rows(const Eigen::MatrixXd& H, const Eigen::VectorXd& rhs, int m) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(H.rows(), H.cols() + m);
  F.leftCols(H.cols()) = H;
  return Polytope(F, rhs);
}

// Tube-form robust controller: all rows tightened by the RPI error set S, a
// nominally invariant terminal set, region Proj(C_T) + S.
void synthesize_tube(SynthesisBundle& b, const SynthesisOptions& opt) {
  const LinearSystem& sys = b.sys;
  const ConstraintSpec& spec = b.spec;
  const Eigen::MatrixXd& K = b.gains.K;
  const int n = sys.n(), m = sys.m(), T = spec.T;

  const Polytope V = affine_image(b.dist.support_polytope(), sys.Bw);
  b.S = minimal_rpi_outer(sys.A + sys.B * K, V, opt.baseline.tube_alpha, 1000, &b.tube_terms);
  b.tube = true;

  const auto offset = [&](const Eigen::VectorXd& dir) {
    const auto s = support(b.S, dir);
    if (s.status != SetStatus::Ok) throw Error(ErrorKind::Numerical, "mpc", "support of the tube set failed");
    return s.value;
  };
  Eigen::VectorXd hs(spec.p()), gs(spec.q());
  for (int j = 0; j < spec.p(); ++j) hs[j] = spec.h[j] - offset(spec.H.row(j).transpose());
  for (int j = 0; j < spec.q(); ++j) gs[j] = spec.g[j] - offset((spec.G.row(j) * K).transpose());

  Tightening& t = b.tight;
  t.eta = hs.transpose().replicate(std::max(T - 1, 1), 1);
  t.mu = gs.transpose().replicate(T, 1);
  t.eta_first = hs;

  ConstraintSpec nominal = spec;
  nominal.g = gs;
  const Polytope origin = Polytope::box(Eigen::VectorXd::Zero(sys.mw()), Eigen::VectorXd::Zero(sys.mw()));
  Polytope Zf = terminal_invariant(sys, K, hs, nominal, origin, &b.sets.terminal_log, opt.sets);
  if (spec.p() > 0) Zf = reduce(Zf.intersect(Polytope(spec.H, hs)));
  if (Zf.is_empty()) throw Error(ErrorKind::Infeasible, "mpc", "tube terminal set is empty");
  b.sets.X_T = Zf;
  b.sets.Z_T = Zf;
  t.H_T = Zf.A();
  t.h_T = Zf.b();
  t.eta_T = Zf.b();
  t.terminal = Zf;

  Polytope C = t_step_set(sys, nominal, t);
  if (spec.p() > 0) C = reduce(C.intersect(state_rows(spec.H, hs, m)));
  if (C.is_empty()) throw Error(ErrorKind::Infeasible, "mpc", "tube T-step set is empty");
  b.sets.C_T = C;
  b.sets.C_T_inf = C;
  b.sets.rci_log = IterationLog{0, true, 0.0};
  b.sets.C_T_inf_x = minkowski_sum(first_step_region(C, n), b.S);
}

}  // namespace

SynthesisBundle synthesize(const LinearSystem& sys, const DisturbanceModel& dist, const ConstraintSpec& spec,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, Mode mode,
                           const SynthesisOptions& opt) {
  sys.validate();
  spec.validate(sys);
  if (dist.dim() != sys.mw()) throw Error(ErrorKind::Config, "mpc", "disturbance dimension does not match Bw");
  validate_weights(sys, Q, R);

  SynthesisBundle b;
  b.sys = sys;
  b.dist = dist;
  b.spec = spec;
  b.mode = mode;

  const LqrResult lqr = lqr_gain(sys.A, sys.B, Q, R);
  b.gains.K = lqr.K;
  b.gains.Q = Q;
  b.gains.R = R;
  const Eigen::MatrixXd Acl = sys.A + sys.B * lqr.K;
  b.gains.P = dlyap(Acl, Q + lqr.K.transpose() * R * lqr.K);

  const Polytope& W = dist.support_polytope();
  if (mode == Mode::Robust && opt.baseline.robust_form == RobustForm::Tube) {
    synthesize_tube(b, opt);
  } else {
    if (mode == Mode::Proposed) {
      b.tight.eta = tighten_state(sys, lqr.K, spec, dist, opt.scenario);
      b.tight.mu = tighten_input(sys, lqr.K, spec, dist, opt.scenario);
      b.tight.eta_first = b.tight.eta.row(0).transpose();
    } else {
      b.tight = baseline_tightening(sys, lqr.K, spec, dist, mode, opt.scenario,
                                    mode == Mode::RfTube && opt.baseline.rf_worst_case_inputs);
    }

    b.sets.X_T = terminal_invariant(sys, lqr.K, b.tight.eta_first, spec, W, &b.sets.terminal_log, opt.sets);
    const TerminalTightening tt =
        mode == Mode::Proposed
            ? tighten_terminal(sys, lqr.K, b.sets.X_T, spec.eps_T, spec.T, dist, opt.scenario)
            : baseline_terminal(sys, lqr.K, b.sets.X_T, spec.eps_T, spec.T, dist, mode, opt.scenario);
    b.tight.H_T = b.sets.X_T.A();
    b.tight.h_T = b.sets.X_T.b();
    b.tight.eta_T = tt.eta_T;
    b.tight.terminal = tt.terminal;
    b.sets.Z_T = tt.terminal;

    b.sets.C_T = t_step_set(sys, spec, b.tight);
    if (mode == Mode::Proposed) {
      b.sets.C_T_inf = robust_control_invariant(b.sets.C_T, sys, W, &b.sets.rci_log, opt.sets);
    } else {
      b.sets.C_T_inf = b.sets.C_T;
      b.sets.rci_log = IterationLog{0, true, 0.0};
    }
    b.sets.C_T_inf_x = first_step_region(b.sets.C_T_inf, sys.n());
  }
  if (b.sets.C_T_inf_x.is_empty()) throw Error(ErrorKind::Infeasible, "mpc", "first-step region is empty");
  b.region_bounded = is_bounded(b.sets.C_T_inf_x);
  if (!b.region_bounded && !opt.allow_unbounded_region)
    throw Error(ErrorKind::Unbounded, "mpc",
                "first-step region is unbounded (add input or state constraints, or allow_unbounded_region)");

  if (opt.cost_samples > 0) {
    const CostConstant c = cost_constant(b.gains, sys, dist, spec.T, opt.cost_samples, opt.scenario.seed);
    b.gains.cost_constant = c.monte_carlo;
    b.gains.cost_constant_se = c.standard_error;
  }
  return b;
}

OnlineProgram::OnlineProgram(const SynthesisBundle& bundle)
    : n_(bundle.sys.n()), m_(bundle.sys.m()), T_(bundle.spec.T), nz_(bundle.tube ? bundle.sys.n() : 0),
      K_(bundle.gains.K), G_(bundle.spec.G), g_(bundle.spec.g) {
  const auto& sys = bundle.sys;
  const auto& spec = bundle.spec;
  const int n = n_, m = m_, T = T_, nz = nz_;
  const int dim = nz + T * m;

  // z_l = A^l z_0 + sum_{i<l} A^{l-1-i} B v_i with z_0 = x or the first block of y.
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero((T + 1) * n, n);
  Eigen::MatrixXd Gamma = Eigen::MatrixXd::Zero((T + 1) * n, T * m);
  Phi.topRows(n).setIdentity();
  for (int l = 1; l <= T; ++l) {
    Phi.middleRows(l * n, n) = sys.A * Phi.middleRows((l - 1) * n, n);
    Gamma.middleRows(l * n, n) = sys.A * Gamma.middleRows((l - 1) * n, n);
    Gamma.block(l * n, (l - 1) * m, n, m) = sys.B;
  }
  Zy_ = Eigen::MatrixXd::Zero((T + 1) * n, dim);
  Zx_ = Eigen::MatrixXd::Zero((T + 1) * n, n);
  Zy_.rightCols(T * m) = Gamma;
  if (nz > 0)
    Zy_.leftCols(n) = Phi;
  else
    Zx_ = Phi;
  Eigen::MatrixXd Vsel = Eigen::MatrixXd::Zero(T * m, dim);
  Vsel.rightCols(T * m).setIdentity();

  Eigen::MatrixXd Qbar = Eigen::MatrixXd::Zero((T + 1) * n, (T + 1) * n);
  for (int l = 0; l < T; ++l) Qbar.block(l * n, l * n, n, n) = bundle.gains.Q;
  Qbar.block(T * n, T * n, n, n) = bundle.gains.P;
  Eigen::MatrixXd Rbar = Eigen::MatrixXd::Zero(T * m, T * m);
  for (int l = 0; l < T; ++l) Rbar.block(l * m, l * m, m, m) = bundle.gains.R;

  Hess_ = 2.0 * (Zy_.transpose() * Qbar * Zy_ + Vsel.transpose() * Rbar * Vsel);
  Hess_ = 0.5 * (Hess_ + Hess_.transpose());
  Lin_ = 2.0 * Zy_.transpose() * Qbar * Zx_;
  Const_ = Zx_.transpose() * Qbar * Zx_;

  const Polytope& Z = bundle.sets.Z_T;
  const Polytope& C = bundle.sets.C_T_inf;
  const int p = spec.p(), q = spec.q();
  const int first_state = nz > 0 ? 0 : 1;
  const int tube_rows = nz > 0 ? bundle.S.rows() : 0;
  const int rows = p * (T - first_state) + q * T + Z.rows() + C.rows() + tube_rows;
  Arow_ = Eigen::MatrixXd::Zero(rows, dim);
  b0_ = Eigen::VectorXd::Zero(rows);
  Bx_ = Eigen::MatrixXd::Zero(rows, n);
  int r = 0;
  const auto add_state_rows = [&](const Eigen::MatrixXd& F, const Eigen::VectorXd& f, int l) {
    const int k = static_cast<int>(F.rows());
    Arow_.middleRows(r, k) = F * Zy_.middleRows(l * n, n);
    Bx_.middleRows(r, k) = F * Zx_.middleRows(l * n, n);
    b0_.segment(r, k) = f;
    r += k;
  };
  for (int l = first_state; l < T; ++l)
    add_state_rows(spec.H, bundle.tight.eta.row(std::max(l - 1, 0)).transpose(), l);
  for (int l = 0; l < T; ++l) {
    Arow_.block(r, nz + l * m, q, m) = spec.G;
    b0_.segment(r, q) = bundle.tight.mu.row(l).transpose();
    r += q;
  }
  add_state_rows(Z.A(), Z.b(), T);
  // (z_0, v_0) in C_T^inf.
  Arow_.middleRows(r, C.rows()) = C.A().leftCols(n) * Zy_.topRows(n);
  Arow_.block(r, nz, C.rows(), m) += C.A().rightCols(m);
  Bx_.middleRows(r, C.rows()) = C.A().leftCols(n) * Zx_.topRows(n);
  b0_.segment(r, C.rows()) = C.b();
  r += C.rows();
  if (nz > 0) {
    // F_S (x - z_0) <= f_S.
    Arow_.block(r, 0, tube_rows, n) = -bundle.S.A();
    Bx_.middleRows(r, tube_rows) = bundle.S.A();
    b0_.segment(r, tube_rows) = bundle.S.b();
  }
}

QpProblem OnlineProgram::build(const Eigen::VectorXd& x) const {
  return QpProblem{Hess_, Lin_ * x, Polytope(Arow_, b0_ - Bx_ * x)};
}

double OnlineProgram::cost(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  return 0.5 * y.dot(Hess_ * y) + y.dot(Lin_ * x) + x.dot(Const_ * x);
}

std::vector<Eigen::VectorXd> OnlineProgram::predict(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd z = Zy_ * y + Zx_ * x;
  std::vector<Eigen::VectorXd> out(T_ + 1);
  for (int l = 0; l <= T_; ++l) out[l] = z.segment(l * n_, n_);
  return out;
}

Eigen::VectorXd OnlineProgram::applied_input(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  Eigen::VectorXd u = y.segment(nz_, m_);
  if (nz_ > 0) u += K_ * (x - y.head(n_));
  // The input is a hard constraint on the plant: remove rounding-level
  // overshoot left by the solver. Larger excesses are left for the audit.
  for (int j = 0; j < G_.rows(); ++j) {
    const double excess = G_.row(j).dot(u) - g_[j];
    if (excess > 0.0 && excess <= 1e-8) u -= G_.row(j).transpose() * (excess / G_.row(j).squaredNorm());
  }
  return u;
}

Eigen::VectorXd OnlineProgram::shifted_candidate(const Eigen::VectorXd& x_prev, const Eigen::VectorXd& y_prev,
                                                 const Eigen::VectorXd& x_next) const {
  const auto z = predict(x_prev, y_prev);
  const Eigen::VectorXd v = inputs(y_prev);
  Eigen::VectorXd out(decision_dim());
  if (nz_ > 0) {
    out.head(n_) = z[1];
    for (int l = 0; l + 1 < T_; ++l) out.segment(nz_ + l * m_, m_) = v.segment((l + 1) * m_, m_);
    out.tail(m_) = K_ * z[T_];
    return out;
  }
  // Nominal successor driven by the same error feedback the tightening assumes.
  const Eigen::MatrixXd A = Zx_.middleRows(n_, n_);
  const Eigen::MatrixXd B = Zy_.block(n_, 0, n_, m_);
  Eigen::VectorXd zc = x_next;
  for (int l = 0; l < T_; ++l) {
    const Eigen::VectorXd vl =
        l + 1 < T_ ? Eigen::VectorXd(v.segment((l + 1) * m_, m_) + K_ * (zc - z[l + 1])) : Eigen::VectorXd(K_ * zc);
    out.segment(l * m_, m_) = vl;
    zc = A * zc + B * vl;
  }
  return out;
}

QpProblem build_online_qp(const SynthesisBundle& bundle, const Eigen::VectorXd& x) {
  return OnlineProgram(bundle).build(x);
}

namespace {

StepResult solve_step(const OnlineProgram& prog, const Eigen::VectorXd& x, QpWarmStart* warm) {
  const QpResult qp = solve_qp(prog.build(x), warm);
  StepResult out;
  out.status = qp.status;
  if (qp.status != QpStatus::Optimal) return out;
  out.y = qp.x;
  out.v = prog.inputs(qp.x);
  out.v0 = out.v.head(prog.input_dim());
  out.u = prog.applied_input(x, qp.x);
  out.z = prog.predict(x, qp.x);
  out.value = prog.cost(x, qp.x);
  return out;
}

}  // namespace

StepResult Controller::step(const Eigen::VectorXd& x, bool warm_start) {
  if (!warm_start) warm_.working_set.clear();
  return solve_step(program_, x, &warm_);
}

bool Controller::is_feasible(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tol) const {
  const QpProblem p = program_.build(x);
  return ((p.constraints.A() * y - p.constraints.b()).array() <= tol).all();
}

StepResult control_step(const SynthesisBundle& bundle, const Eigen::VectorXd& x, QpWarmStart* warm) {
  return solve_step(OnlineProgram(bundle), x, warm);
}

}  // namespace smpc
