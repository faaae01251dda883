#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>

#include "fixtures.hpp"
#include "smpc/lp.hpp"
#include "smpc/qp.hpp"

using namespace smpc;

namespace {

// Textbook tableau simplex for max c'x, A x <= b, x >= 0 with b >= 0 (slack basis
// is feasible); Bland's rule. Returns nullopt if unbounded.
std::optional<double> tableau_simplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  const int m = static_cast<int>(A.rows()), n = static_cast<int>(A.cols());
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  T.topLeftCorner(m, n) = A;
  T.block(0, n, m, m).setIdentity();
  T.topRightCorner(m, 1) = b;
  T.bottomLeftCorner(1, n) = -c.transpose();
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;
  for (int it = 0; it < 10000; ++it) {
    int enter = -1;
    for (int j = 0; j < n + m; ++j)
      if (T(m, j) < -1e-12) {
        enter = j;
        break;
      }
    if (enter < 0) return T(m, n + m);
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i)
      if (T(i, enter) > 1e-12) {
        const double ratio = T(i, n + m) / T(i, enter);
        if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
    if (leave < 0) return std::nullopt;
    T.row(leave) /= T(leave, enter);
    for (int i = 0; i <= m; ++i)
      if (i != leave) T.row(i) -= T(i, enter) * T.row(leave);
    basis[leave] = enter;
  }
  return std::nullopt;
}

// Exhaustive active-set oracle: every subset of at most d rows, solve the
// equality-constrained KKT system, keep primal feasible points with
// nonnegative multipliers, return the best.
struct Oracle {
  bool feasible = false;
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
};

Oracle qp_oracle(const Eigen::MatrixXd& H, const Eigen::VectorXd& q, const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const int d = static_cast<int>(H.rows()), r = static_cast<int>(A.rows());
  Oracle best;
  std::vector<int> idx;
  for (unsigned mask = 0; mask < (1u << r); ++mask) {
    idx.clear();
    for (int i = 0; i < r; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const int k = static_cast<int>(idx.size());
    if (k > d) continue;
    Eigen::MatrixXd Ak(k, d);
    Eigen::VectorXd bk(k);
    for (int i = 0; i < k; ++i) {
      Ak.row(i) = A.row(idx[i]);
      bk[i] = b[idx[i]];
    }
    if (k > 0 && Eigen::FullPivLU<Eigen::MatrixXd>(Ak).rank() < k) continue;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d + k, d + k);
    K.topLeftCorner(d, d) = H;
    K.topRightCorner(d, k) = Ak.transpose();
    K.bottomLeftCorner(k, d) = Ak;
    Eigen::VectorXd rhs(d + k);
    rhs << -q, bk;
    const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
    const Eigen::VectorXd x = sol.head(d), lam = sol.tail(k);
    if ((lam.array() < -1e-9).any()) continue;
    if (((A * x - b).array() > 1e-9).any()) continue;
    const double v = 0.5 * x.dot(H * x) + q.dot(x);
    if (v < best.value) {
      best.feasible = true;
      best.value = v;
      best.x = x;
    }
  }
  return best;
}

struct RandomQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  QpProblem problem() const { return {H, q, Polytope(A, b)}; }
};

RandomQp random_qp(std::mt19937_64& rng, int d, int r, bool make_infeasible) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.1, 1.0);
  RandomQp out;
  const Eigen::MatrixXd L = fx::random_matrix(rng, d, d);
  out.H = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
  out.q.resize(d);
  for (int i = 0; i < d; ++i) out.q[i] = 3.0 * g(rng);
  out.A = fx::random_matrix(rng, r, d);
  out.b.resize(r);
  for (int i = 0; i < r; ++i) out.b[i] = u(rng);
  if (make_infeasible && r >= 2) {
    out.A.row(1) = -out.A.row(0);
    out.b[1] = -out.b[0] - 0.5;
  }
  return out;
}

}  // namespace

TEST_CASE("small LPs") {
  Eigen::MatrixXd F(1, 1);
  F << 1;
  LpResult r = solve_lp(F, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.0));
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.value == doctest::Approx(1.0));

  const Polytope U = Polytope::box(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1));
  r = solve_lp(U.A(), U.b(), Eigen::Vector2d(1, 1));
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.value == doctest::Approx(2.0));
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(1.0));

  // Unbounded: the returned ray must be an ascent direction of the recession cone.
  Eigen::MatrixXd G(1, 2);
  G << 1, 0;
  r = solve_lp(G, Eigen::VectorXd::Constant(1, 1.0), Eigen::Vector2d(0, 1));
  REQUIRE(r.status == LpStatus::Unbounded);
  CHECK(((G * r.ray).array() <= 1e-9).all());
  CHECK(r.ray[1] > 0.0);

  // Infeasible: phase-1 optimum is positive.
  Eigen::MatrixXd E(2, 1);
  E << 1, -1;
  r = solve_lp(E, Eigen::Vector2d(-1, -1), Eigen::VectorXd::Constant(1, 1.0));
  CHECK(r.status == LpStatus::Infeasible);
  CHECK(r.infeasibility > 0.0);
}

TEST_CASE("LP values match a tableau simplex on random 5-D problems") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-0.5, 1.0), pos(0.5, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5, m = 7;
    Eigen::MatrixXd A = fx::random_matrix(rng, m, n, -0.5, 1.0);
    A.row(m - 1).setOnes();  // bounds the feasible set
    Eigen::VectorXd b(m), c(n);
    for (int i = 0; i < m; ++i) b[i] = pos(rng);
    for (int i = 0; i < n; ++i) c[i] = u(rng);
    const auto oracle = tableau_simplex(A, b, c);
    REQUIRE(oracle.has_value());
    Eigen::MatrixXd F(m + n, n);
    F << A, -Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd f(m + n);
    f << b, Eigen::VectorXd::Zero(n);
    const LpResult r = solve_lp(F, f, c);
    REQUIRE(r.status == LpStatus::Optimal);
    CHECK(r.value == doctest::Approx(*oracle).epsilon(1e-7));
    CHECK(((F * r.x - f).array() <= 1e-8).all());
    // Dual certificate reproduces the value.
    CHECK((r.dual.array() >= -1e-9).all());
    CHECK((F.transpose() * r.dual - c).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(f.dot(r.dual) == doctest::Approx(r.value).epsilon(1e-7));
  }
}

TEST_CASE("LP matches vertex enumeration up to d = 8") {
  std::mt19937_64 rng(103);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + trial % 8, extra = 3;
    // Simplex-shaped bound -x_i <= 1, sum x <= d, then random cuts through the interior.
    const int r = d + 1 + extra;
    Eigen::MatrixXd F(r, d);
    Eigen::VectorXd f(r);
    F.topRows(d) = -Eigen::MatrixXd::Identity(d, d);
    f.head(d).setOnes();
    F.row(d).setOnes();
    f[d] = d;
    F.bottomRows(extra) = fx::random_matrix(rng, extra, d);
    for (int i = 0; i < extra; ++i) f[d + 1 + i] = 0.2 + std::abs(g(rng));
    Eigen::VectorXd c(d);
    for (int i = 0; i < d; ++i) c[i] = g(rng);

    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> pick(d);
    std::function<void(int, int)> rec = [&](int start, int depth) {
      if (depth == d) {
        Eigen::MatrixXd M(d, d);
        Eigen::VectorXd rhs(d);
        for (int i = 0; i < d; ++i) {
          M.row(i) = F.row(pick[i]);
          rhs[i] = f[pick[i]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        if (lu.rank() < d) return;
        const Eigen::VectorXd x = lu.solve(rhs);
        if (((F * x - f).array() <= 1e-9).all()) best = std::max(best, c.dot(x));
        return;
      }
      for (int i = start; i < r; ++i) {
        pick[depth] = i;
        rec(i + 1, depth + 1);
      }
    };
    rec(0, 0);
    const LpResult lp = solve_lp(F, f, c);
    REQUIRE(lp.status == LpStatus::Optimal);
    CHECK(lp.value == doctest::Approx(best).epsilon(1e-7));
  }
}

TEST_CASE("feasibility point") {
  const Polytope U = Polytope::box(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1));
  const FeasibilityResult f = find_feasible_point(U.A(), U.b());
  CHECK(f.feasible);
  CHECK(f.max_violation == doctest::Approx(-0.5));
  Eigen::MatrixXd E(2, 1);
  E << 1, -1;
  CHECK_FALSE(find_feasible_point(E, Eigen::Vector2d(-1, -1)).feasible);
}

TEST_CASE("trivial QPs") {
  // min x^2 over x >= 1: 0.5 * 2 x^2.
  QpProblem p{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Zero(1),
              Polytope(Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::VectorXd::Constant(1, -1.0))};
  QpResult r = solve_qp(p);
  REQUIRE(r.status == QpStatus::Optimal);
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.value == doctest::Approx(1.0));

  // min |x - x0|^2 with x0 interior: no active constraints.
  const Eigen::Vector2d x0(0.2, -0.3);
  QpProblem q{2.0 * Eigen::Matrix2d::Identity(), -2.0 * x0,
              Polytope::box(Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1))};
  r = solve_qp(q);
  REQUIRE(r.status == QpStatus::Optimal);
  CHECK((r.x - x0).norm() < 1e-12);
  CHECK(r.active_set.empty());
}

TEST_CASE("QP matches exhaustive active-set enumeration up to d = 8") {
  std::mt19937_64 rng(107);
  int infeasible_seen = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + trial % 8, r = 4 + trial % 7;
    const bool bad = trial % 17 == 0;
    const RandomQp inst = random_qp(rng, d, r, bad);
    const Oracle o = qp_oracle(inst.H, inst.q, inst.A, inst.b);
    const QpResult res = solve_qp(inst.problem());
    if (!o.feasible) {
      ++infeasible_seen;
      CHECK(res.status == QpStatus::Infeasible);
      continue;
    }
    REQUIRE(res.status == QpStatus::Optimal);
    CHECK((res.x - o.x).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + o.x.cwiseAbs().maxCoeff()));
    CHECK(res.value == doctest::Approx(o.value).epsilon(1e-6));

    // KKT residuals.
    Eigen::VectorXd grad = inst.H * res.x + inst.q + inst.A.transpose() * res.multipliers;
    CHECK(grad.cwiseAbs().maxCoeff() <= 1e-7 * (1.0 + inst.q.cwiseAbs().maxCoeff()));
    CHECK(((inst.A * res.x - inst.b).array() <= 1e-8).all());
    CHECK((res.multipliers.array() >= -1e-9).all());
    const Eigen::VectorXd slack = inst.b - inst.A * res.x;
    CHECK((res.multipliers.array() * slack.array()).abs().maxCoeff() <= 1e-7);
  }
  CHECK(infeasible_seen > 0);
}

TEST_CASE("QP optimum is not improved along feasible directions") {
  std::mt19937_64 rng(109);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + trial % 6;
    const RandomQp inst = random_qp(rng, d, 8, false);
    const QpProblem p = inst.problem();
    const QpResult res = solve_qp(p);
    REQUIRE(res.status == QpStatus::Optimal);
    int tried = 0;
    for (int k = 0; k < 1000 && tried < 100; ++k) {
      Eigen::VectorXd dir(d);
      for (int i = 0; i < d; ++i) dir[i] = g(rng);
      dir.normalize();
      const Eigen::VectorXd y = res.x + 1e-4 * dir;
      if (((inst.A * y - inst.b).array() > 0.0).any()) continue;
      ++tried;
      CHECK(qp_objective(p, y) >= res.value - 1e-12);
    }
  }
}

TEST_CASE("warm start gives the cold-start solution and identical reruns are bitwise equal") {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomQp inst = random_qp(rng, 6, 10, false);
    const QpResult cold = solve_qp(inst.problem());
    REQUIRE(cold.status == QpStatus::Optimal);
    QpWarmStart warm;
    warm.working_set = cold.active_set;
    RandomQp shifted = inst;
    shifted.q += 1e-3 * Eigen::VectorXd::Ones(6);
    const QpResult w = solve_qp(shifted.problem(), &warm);
    const QpResult c = solve_qp(shifted.problem());
    REQUIRE(w.status == QpStatus::Optimal);
    CHECK((w.x - c.x).cwiseAbs().maxCoeff() <= 1e-7);

    const QpResult again = solve_qp(inst.problem());
    CHECK(again.x == cold.x);
  }
}
