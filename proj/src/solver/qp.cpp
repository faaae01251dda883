#include "smpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "smpc/lp.hpp"

namespace smpc {
namespace {

struct EqpSolution {
  Eigen::VectorXd x;       // minimizer on {A_W x = b_W}, or the step when solving for p
  Eigen::VectorXd lambda;  // multipliers of the working rows
  bool ok = true;
};

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& A, const std::vector<int>& idx) {
  Eigen::MatrixXd out(idx.size(), A.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = A.row(idx[i]);
  return out;
}

// Null-space solve of  min 0.5 p'Hp + q'p  s.t.  Aw p = rhs,  with Aw' = Q [R; 0].
// Stays accurate when Aw H^{-1} Aw' is badly conditioned.
EqpSolution solve_eqp(const Eigen::MatrixXd& H, const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& q,
                      const Eigen::MatrixXd& Aw, const Eigen::VectorXd& rhs) {
  EqpSolution s;
  const int d = static_cast<int>(H.rows());
  const int k = static_cast<int>(Aw.rows());
  if (k == 0) {
    s.x = -llt.solve(q);
    s.lambda.resize(0);
    return s;
  }
  if (k > d) {
    s.ok = false;
    return s;
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Aw.transpose());
  const Eigen::MatrixXd Qm = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const double rmax = R.diagonal().cwiseAbs().maxCoeff();
  if (!(R.diagonal().cwiseAbs().minCoeff() > 1e-12 * std::max(1.0, rmax))) {
    s.ok = false;
    return s;
  }
  const Eigen::MatrixXd Y = Qm.leftCols(k);
  const Eigen::MatrixXd Z = Qm.rightCols(d - k);
  const Eigen::VectorXd py = R.transpose().triangularView<Eigen::Lower>().solve(rhs);
  Eigen::VectorXd p = Y * py;
  if (d > k) {
    const Eigen::MatrixXd ZHZ = Z.transpose() * H * Z;
    const Eigen::LLT<Eigen::MatrixXd> red(ZHZ);
    if (red.info() != Eigen::Success) {
      s.ok = false;
      return s;
    }
    p += Z * red.solve(-(Z.transpose() * (q + H * p)));
  }
  // H p + q + Aw' lambda = 0  =>  R lambda = -Y'(H p + q).
  s.lambda = R.triangularView<Eigen::Upper>().solve(-(Y.transpose() * (H * p + q)));
  s.x = std::move(p);
  return s;
}

// Keep a maximal linearly independent prefix-greedy subset of rows.
std::vector<int> independent_rows(const Eigen::MatrixXd& A, const std::vector<int>& idx) {
  std::vector<int> kept;
  for (int i : idx) {
    std::vector<int> trial = kept;
    trial.push_back(i);
    const Eigen::MatrixXd M = gather_rows(A, trial);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M.transpose());
    qr.setThreshold(1e-9);
    if (qr.rank() == static_cast<Eigen::Index>(trial.size())) kept = std::move(trial);
  }
  return kept;
}

}  // namespace

double qp_objective(const QpProblem& p, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(p.hessian * x) + p.linear.dot(x);
}

QpResult solve_qp(const QpProblem& p, QpWarmStart* warm, const NumericSettings& tol) {
  const Eigen::MatrixXd& A = p.constraints.A();
  const Eigen::VectorXd& b = p.constraints.b();
  const Eigen::MatrixXd& H = p.hessian;
  const Eigen::VectorXd& g = p.linear;
  const int d = static_cast<int>(H.rows());
  const int r = static_cast<int>(A.rows());

  QpResult res;
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) return res;

  Eigen::VectorXd x;
  std::vector<int> W;
  std::vector<char> in_w(r, 0);

  if (warm != nullptr && !warm->working_set.empty()) {
    std::vector<int> cand;
    for (int i : warm->working_set)
      if (i >= 0 && i < r && A.row(i).norm() > 0.0) cand.push_back(i);
    cand = independent_rows(A, cand);
    const Eigen::MatrixXd Aw = gather_rows(A, cand);
    Eigen::VectorXd bw(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) bw[i] = b[cand[i]];
    // Minimizer of the objective on {A_W x = b_W}.
    const auto s = solve_eqp(H, llt, g, Aw, bw);
    if (s.ok && (r == 0 || ((A * s.x) - b).maxCoeff() <= tol.feas)) {
      x = s.x;
      W = cand;
    }
  }
  if (x.size() == 0) {
    const auto feas = find_feasible_point(A, b, tol);
    if (!feas.feasible) {
      res.status = std::isfinite(feas.max_violation) ? QpStatus::Infeasible
                                                    : QpStatus::NumericalFailure;
      return res;
    }
    x = feas.x;
  }
  for (int i : W) in_w[i] = 1;

  const int max_iter = 100 * (d + r);
  Eigen::VectorXd lambda;
  // After a run of zero-length steps switch to lowest-index choices (Bland),
  // which cannot cycle at a degenerate vertex.
  int degenerate_run = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter + 1;
    const Eigen::VectorXd q = H * x + g;
    const Eigen::MatrixXd Aw = gather_rows(A, W);
    const auto s = solve_eqp(H, llt, q, Aw, Eigen::VectorXd::Zero(W.size()));
    if (!s.ok) return res;
    const Eigen::VectorXd& step = s.x;

    // Stationary on the working set when the step is negligible or no longer
    // decreases the objective beyond rounding (ill-conditioned Hessians).
    const double decrease = -(q.dot(step) + 0.5 * step.dot(H * step));
    const double fscale = 1.0 + std::abs(qp_objective(p, x));
    if (step.lpNorm<Eigen::Infinity>() <= 1e-11 * (1.0 + x.lpNorm<Eigen::Infinity>()) ||
        decrease <= 1e-14 * fscale) {
      lambda = s.lambda;
      int drop = -1;
      double most_negative = -1e-10 * (1.0 + (lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0));
      const bool bland = degenerate_run > d;
      for (int k = 0; k < static_cast<int>(W.size()); ++k) {
        if (bland ? lambda[k] < most_negative && (drop < 0 || W[k] < W[drop]) : lambda[k] < most_negative) {
          if (!bland) most_negative = lambda[k];
          drop = k;
        }
      }
      if (drop < 0) {
        res.status = QpStatus::Optimal;
        break;
      }
      in_w[W[drop]] = 0;
      W.erase(W.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    for (int i = 0; i < r; ++i) {
      if (in_w[i]) continue;
      const double ap = A.row(i).dot(step);
      if (ap <= tol.pivot * (1.0 + A.row(i).norm() * step.norm())) continue;
      const double slack = std::max(0.0, b[i] - A.row(i).dot(x));
      const double a = slack / ap;
      if (a < alpha) {
        alpha = a;
        blocking = i;
      }
    }
    degenerate_run = alpha * step.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + x.lpNorm<Eigen::Infinity>())
                         ? degenerate_run + 1
                         : 0;
    x += alpha * step;
    if (blocking >= 0) {
      W.push_back(blocking);
      in_w[blocking] = 1;
    }
  }
  if (res.status != QpStatus::Optimal) return res;

  res.x = x;
  res.value = qp_objective(p, x);
  res.multipliers = Eigen::VectorXd::Zero(r);
  for (std::size_t k = 0; k < W.size(); ++k) res.multipliers[W[k]] = std::max(0.0, lambda[k]);
  res.active_set = W;
  std::sort(res.active_set.begin(), res.active_set.end());
  if (warm != nullptr) warm->working_set = res.active_set;
  return res;
}

}  // namespace smpc
