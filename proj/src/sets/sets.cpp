#include "smpc/sets.hpp"

#include <limits>
#include <numeric>
#include <vector>

#include "smpc/errors.hpp"

namespace smpc {
namespace {

std::vector<int> first_n(int n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// Largest amount by which a support of P exceeds a facet of Q (0 if P is inside Q).
double support_gap(const Polytope& P, const Polytope& Q) {
  double gap = 0.0;
  for (int i = 0; i < Q.rows(); ++i) {
    const auto s = support(P, Q.A().row(i).transpose());
    if (s.status == SetStatus::Unbounded) return std::numeric_limits<double>::infinity();
    if (s.status == SetStatus::Empty) return 0.0;
    gap = std::max(gap, s.value - Q.b()[i]);
  }
  return gap;
}

// {(z, v) : G v <= mu} in R^{n+m}.
Polytope input_rows(const Eigen::MatrixXd& G, const Eigen::VectorXd& mu, int n) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(G.rows(), n + G.cols());
  F.rightCols(G.cols()) = G;
  return Polytope(F, mu);
}

Eigen::MatrixXd stacked_dynamics(const LinearSystem& sys) {
  Eigen::MatrixXd AB(sys.n(), sys.n() + sys.m());
  AB << sys.A, sys.B;
  return AB;
}

}  // namespace

Polytope terminal_invariant(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::VectorXd& eta_first,
                            const ConstraintSpec& spec, const Polytope& W, IterationLog* log,
                            const SetOptions& opt) {
  const Eigen::MatrixXd Acl = sys.A + sys.B * K;
  Eigen::MatrixXd F(spec.p() + spec.q(), sys.n());
  Eigen::VectorXd f(spec.p() + spec.q());
  if (spec.p() > 0) {
    F.topRows(spec.p()) = spec.H * Acl;
    f.head(spec.p()) = eta_first;
  }
  if (spec.q() > 0) {
    F.bottomRows(spec.q()) = spec.G * K;
    f.tail(spec.q()) = spec.g;
  }
  Polytope S = reduce(Polytope(F, f));
  if (S.is_empty()) throw Error(ErrorKind::Infeasible, "sets", "terminal constraint set is empty");

  IterationLog local;
  IterationLog& lg = log ? *log : local;
  for (int k = 0; k < opt.max_iterations; ++k) {
    const Polytope pre = affine_preimage(pontryagin_diff(S, W, sys.Bw), Acl);
    Polytope next = reduce(S.intersect(pre));
    if (next.is_empty())
      throw Error(ErrorKind::Infeasible, "sets", "disturbance too large: robust invariant terminal set is empty");
    lg.iterations = k + 1;
    lg.residual = support_gap(S, next);
    if (lg.residual <= opt.tol) {
      lg.converged = true;
      return next;
    }
    S = std::move(next);
  }
  throw Error(ErrorKind::Numerical, "sets", "terminal invariant iteration hit its cap");
}

Polytope t_step_set(const LinearSystem& sys, const ConstraintSpec& spec, const Tightening& tight) {
  const int n = sys.n();
  const Eigen::MatrixXd AB = stacked_dynamics(sys);
  const auto keep = first_n(n);
  Polytope next = tight.terminal;
  for (int l = spec.T - 1; l >= 1; --l) {
    Polytope lifted = affine_preimage(next, AB);
    if (spec.q() > 0) lifted = lifted.intersect(input_rows(spec.G, tight.mu.row(l).transpose(), n));
    Polytope reach = project(lifted, keep);
    if (spec.p() > 0) reach = reach.intersect(Polytope(spec.H, tight.eta.row(l - 1).transpose()));
    next = reduce(reach);
    if (next.is_empty()) throw Error(ErrorKind::Infeasible, "sets", "T-step recursion emptied at step " + std::to_string(l));
  }
  Polytope C = affine_preimage(next, AB);
  if (spec.q() > 0) C = C.intersect(input_rows(spec.G, tight.mu.row(0).transpose(), n));
  C = reduce(C);
  if (C.is_empty()) throw Error(ErrorKind::Infeasible, "sets", "T-step set is empty");
  return C;
}

Polytope robust_control_step(const Polytope& K, const LinearSystem& sys, const Polytope& W) {
  const Polytope Kx = project(K, first_n(sys.n()));
  const Polytope target = pontryagin_diff(Kx, W, sys.Bw);
  if (target.is_empty()) return Polytope::empty(K.dim());
  return reduce(K.intersect(affine_preimage(target, stacked_dynamics(sys))));
}

Polytope robust_control_invariant(const Polytope& C, const LinearSystem& sys, const Polytope& W, IterationLog* log,
                                  const SetOptions& opt) {
  IterationLog local;
  IterationLog& lg = log ? *log : local;
  Polytope cur = reduce(C);
  if (cur.is_empty()) throw Error(ErrorKind::Infeasible, "sets", "T-step set is empty");
  for (int k = 0; k < opt.max_iterations; ++k) {
    Polytope next = robust_control_step(cur, sys, W);
    if (next.is_empty()) throw Error(ErrorKind::Infeasible, "sets", "no recursively feasible region exists");
    lg.iterations = k + 1;
    lg.residual = support_gap(cur, next);
    if (lg.residual <= opt.tol) {
      lg.converged = true;
      return next;
    }
    cur = std::move(next);
  }
  const Polytope confirm = robust_control_step(cur, sys, W);
  if (!confirm.is_empty() && support_gap(cur, confirm) <= 1e-6) {
    lg.converged = false;
    return cur;
  }
  throw Error(ErrorKind::Numerical, "sets", "robust control invariant iteration did not converge");
}

Polytope minimal_rpi_outer(const Eigen::MatrixXd& Acl, const Polytope& V, double alpha, int max_terms, int* terms) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::Config, "sets", "minimal_rpi_outer needs 0 < alpha < 1");
  const Polytope Vr = reduce(V);
  if (Vr.is_empty() || !is_bounded(Vr)) throw Error(ErrorKind::Config, "sets", "disturbance image must be bounded and nonempty");
  {
    // A disturbance-free model: the error set is the origin itself.
    const int n = Vr.dim();
    double extent = 0.0;
    for (int i = 0; i < n; ++i)
      for (double sgn : {1.0, -1.0}) extent = std::max(extent, std::abs(support(Vr, sgn * Eigen::VectorXd::Unit(n, i)).value));
    if (extent <= 1e-12) {
      if (terms != nullptr) *terms = 1;
      return Polytope::box(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n));
    }
  }
  if (Vr.rows() == 0 || Vr.b().minCoeff() <= 1e-12)
    throw Error(ErrorKind::Config, "sets", "disturbance image must contain the origin in its interior");

  Eigen::MatrixXd Ak = Acl;
  int s = 1;
  for (;; ++s) {
    if (s > max_terms) throw Error(ErrorKind::Numerical, "sets", "minimal RPI approximation needs too many terms");
    bool inside = true;
    for (int j = 0; j < Vr.rows() && inside; ++j)
      inside = support(Vr, (Vr.A().row(j) * Ak).transpose()).value <= alpha * Vr.b()[j];
    if (inside) break;
    Ak = Acl * Ak;
  }
  if (terms) *terms = s;

  Eigen::MatrixXd Ai = Eigen::MatrixXd::Identity(Acl.rows(), Acl.cols());
  Polytope S;
  if (Acl.rows() == 2) {
    // Vertex sums: the images A_cl^i V may be nearly flat, which halfspace
    // arithmetic handles poorly.
    const auto vv = vertices_2d(Vr);
    std::vector<Eigen::Vector2d> pts(vv.begin(), vv.end());
    for (int i = 1; i < s; ++i) {
      Ai = Acl * Ai;
      std::vector<Eigen::Vector2d> next;
      next.reserve(pts.size() * vv.size());
      for (const auto& p : pts)
        for (const auto& v : vv) next.push_back(p + Ai * v);
      S = convex_hull_2d(std::move(next));
      pts = vertices_2d(S);
    }
    if (s == 1) S = Vr;
  } else {
    S = Vr;
    for (int i = 1; i < s; ++i) {
      Ai = Acl * Ai;
      S = minkowski_sum(S, affine_image(Vr, Ai));
    }
  }
  return Polytope(S.A(), S.b() / (1.0 - alpha));
}

Polytope first_step_region(const Polytope& C_T_inf, int n) {
  if (C_T_inf.dim() == n) return reduce(C_T_inf);
  return project(C_T_inf, first_n(n));
}

}  // namespace smpc
