#include "smpc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace smpc {
namespace {

// Revised simplex for  min cost'y  s.t.  M y = rhs, y >= 0, with M = [F' | D]
// where D = diag(sign(rhs)) holds one artificial column per equality row.
// Columns 0..r-1 are structural (rows of F), r..r+d-1 artificial.
class DualSimplex {
 public:
  DualSimplex(const Eigen::MatrixXd& F, const Eigen::VectorXd& f, const Eigen::VectorXd& rhs,
              const NumericSettings& tol)
      : F_(F), f_(f), rhs_(rhs), tol_(tol), r_(static_cast<int>(F.rows())),
        d_(static_cast<int>(F.cols())), sign_(d_), basis_(d_), in_basis_(r_ + d_, -1),
        max_iter_(50 * (r_ + d_) + 1000) {
    for (int i = 0; i < d_; ++i) {
      sign_[i] = rhs_[i] >= 0.0 ? 1.0 : -1.0;
      basis_[i] = r_ + i;
      in_basis_[r_ + i] = i;
    }
  }

  enum class Outcome { Optimal, Unbounded, IterationLimit };

  // Phase 1: minimize the sum of artificials. Returns the optimal sum.
  Outcome phase1(double& sum) {
    phase_ = 1;
    const Outcome o = iterate();
    sum = 0.0;
    for (int i = 0; i < d_; ++i)
      if (basis_[i] >= r_) sum += std::max(0.0, yB_[i]);
    return o;
  }

  // Pivot zero-level artificials out of the basis where a structural column allows it.
  void purge_artificials() {
    for (int pos = 0; pos < d_; ++pos) {
      if (basis_[pos] < r_) continue;
      factor();
      Eigen::VectorXd row = lu_.transpose().solve(Eigen::VectorXd::Unit(d_, pos));
      // row' * column_j is entry pos of B^{-1} a_j.
      int best = -1;
      double best_val = 1e3 * tol_.pivot;
      for (int j = 0; j < r_; ++j) {
        if (in_basis_[j] >= 0) continue;
        const double v = std::abs(F_.row(j).dot(row));
        if (v > best_val) {
          best_val = v;
          best = j;
        }
      }
      if (best >= 0) swap_in(best, pos);
    }
  }

  Outcome phase2() {
    phase_ = 2;
    return iterate();
  }

  // Simplex multipliers pi with B' pi = cost_B; in phase 2 these are the primal x.
  const Eigen::VectorXd& pi() const { return pi_; }

  Eigen::VectorXd structural_y() const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(r_);
    for (int i = 0; i < d_; ++i)
      if (basis_[i] < r_) y[basis_[i]] = std::max(0.0, yB_[i]);
    return y;
  }

 private:
  Eigen::VectorXd column(int j) const {
    if (j < r_) return F_.row(j).transpose();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(d_);
    e[j - r_] = sign_[j - r_];
    return e;
  }

  double cost(int j) const {
    if (phase_ == 1) return j < r_ ? 0.0 : 1.0;
    return j < r_ ? f_[j] : 0.0;
  }

  void factor() {
    Eigen::MatrixXd B(d_, d_);
    for (int i = 0; i < d_; ++i) B.col(i) = column(basis_[i]);
    lu_.compute(B);
  }

  void swap_in(int entering, int pos) {
    in_basis_[basis_[pos]] = -1;
    basis_[pos] = entering;
    in_basis_[entering] = pos;
  }

  Outcome iterate() {
    int degenerate_run = 0;
    bool bland = false;
    for (int iter = 0; iter < max_iter_; ++iter) {
      factor();
      yB_ = lu_.solve(rhs_);
      for (int i = 0; i < d_; ++i)
        if (yB_[i] < 0.0 && yB_[i] > -1e3 * tol_.pivot) yB_[i] = 0.0;
      Eigen::VectorXd cB(d_);
      for (int i = 0; i < d_; ++i) cB[i] = cost(basis_[i]);
      pi_ = lu_.transpose().solve(cB);

      // Pricing. Artificials may only enter during phase 1.
      int entering = -1;
      double best = 0.0;
      const int ncols = phase_ == 1 ? r_ + d_ : r_;
      for (int j = 0; j < ncols; ++j) {
        if (in_basis_[j] >= 0) continue;
        const double scale = 1.0 + (j < r_ ? std::abs(f_[j]) : 0.0);
        const double red = cost(j) - column(j).dot(pi_);
        if (red < -tol_.pivot * scale) {
          if (bland) {
            entering = j;
            break;
          }
          const double norm = j < r_ ? std::max(F_.row(j).norm(), 1e-300) : 1.0;
          if (red / norm < best) {
            best = red / norm;
            entering = j;
          }
        }
      }
      if (entering < 0) return Outcome::Optimal;

      const Eigen::VectorXd delta = lu_.solve(column(entering));
      int leave = -1;
      double theta = std::numeric_limits<double>::infinity();
      for (int i = 0; i < d_; ++i) {
        if (delta[i] <= tol_.pivot) continue;
        const double ratio = std::max(0.0, yB_[i]) / delta[i];
        bool take = false;
        if (ratio < theta - 1e-14) {
          take = true;
        } else if (ratio <= theta + 1e-14 && leave >= 0) {
          take = bland ? basis_[i] < basis_[leave] : delta[i] > delta[leave];
        }
        if (take) {
          theta = ratio;
          leave = i;
        }
      }
      if (leave < 0) return Outcome::Unbounded;
      if (theta <= 1e-14) {
        if (++degenerate_run > 10 * std::max(r_, 1)) bland = true;
      } else {
        degenerate_run = 0;
      }
      swap_in(entering, leave);
    }
    return Outcome::IterationLimit;
  }

  const Eigen::MatrixXd& F_;
  const Eigen::VectorXd& f_;
  Eigen::VectorXd rhs_;
  NumericSettings tol_;
  int r_;
  int d_;
  Eigen::VectorXd sign_;
  std::vector<int> basis_;
  std::vector<int> in_basis_;
  int max_iter_;
  int phase_ = 1;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::VectorXd yB_;
  Eigen::VectorXd pi_;
};

}  // namespace

FeasibilityResult find_feasible_point(const Eigen::MatrixXd& F, const Eigen::VectorXd& f,
                                      const NumericSettings& tol) {
  const int r = static_cast<int>(F.rows());
  const int d = static_cast<int>(F.cols());
  FeasibilityResult out;
  if (r == 0) {
    out.feasible = true;
    out.x = Eigen::VectorXd::Zero(d);
    out.max_violation = -std::numeric_limits<double>::infinity();
    return out;
  }
  // Variables (x, t): maximize -t s.t. F x - t <= f, -t <= 1.
  Eigen::MatrixXd Fa = Eigen::MatrixXd::Zero(r + 1, d + 1);
  Fa.topLeftCorner(r, d) = F;
  Fa.col(d).setConstant(-1.0);
  Eigen::VectorXd fa(r + 1);
  fa.head(r) = f;
  fa[r] = 1.0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(d + 1);
  c[d] = -1.0;

  DualSimplex s(Fa, fa, c, tol);
  double sum = 0.0;
  auto o = s.phase1(sum);
  if (o == DualSimplex::Outcome::Optimal && sum <= tol.feas) {
    s.purge_artificials();
    o = s.phase2();
  }
  if (o != DualSimplex::Outcome::Optimal) {
    // The auxiliary program is always feasible and bounded; reaching this
    // point means the pivoting broke down numerically.
    out.feasible = false;
    out.x = Eigen::VectorXd::Zero(d);
    out.max_violation = std::numeric_limits<double>::infinity();
    return out;
  }
  const Eigen::VectorXd xt = s.pi();
  out.x = xt.head(d);
  out.max_violation = ((F * out.x) - f).maxCoeff();
  out.feasible = out.max_violation <= tol.feas;
  return out;
}

LpResult solve_lp(const Eigen::MatrixXd& F, const Eigen::VectorXd& f, const Eigen::VectorXd& c,
                  const NumericSettings& tol) {
  const int d = static_cast<int>(F.cols());
  LpResult res;

  DualSimplex s(F, f, c, tol);
  double sum = 0.0;
  auto o = s.phase1(sum);
  if (o == DualSimplex::Outcome::IterationLimit) {
    res.status = LpStatus::IterationLimit;
    return res;
  }
  if (sum > tol.feas * (1.0 + c.lpNorm<Eigen::Infinity>())) {
    // c is not a nonnegative combination of rows: unbounded or infeasible.
    const auto feas = find_feasible_point(F, f, tol);
    if (!feas.feasible) {
      res.status = LpStatus::Infeasible;
      res.infeasibility = feas.max_violation;
      return res;
    }
    res.status = LpStatus::Unbounded;
    res.ray = s.pi();
    return res;
  }
  s.purge_artificials();
  o = s.phase2();
  if (o == DualSimplex::Outcome::IterationLimit) {
    res.status = LpStatus::IterationLimit;
    return res;
  }
  if (o == DualSimplex::Outcome::Unbounded) {
    const auto feas = find_feasible_point(F, f, tol);
    // A feasible primal with an unbounded dual is a pivoting breakdown.
    res.status = feas.feasible ? LpStatus::IterationLimit : LpStatus::Infeasible;
    res.infeasibility = feas.max_violation;
    return res;
  }
  res.status = LpStatus::Optimal;
  res.x = s.pi();
  if (res.x.size() != d) res.x = Eigen::VectorXd::Zero(d);
  res.value = c.dot(res.x);
  res.dual = s.structural_y();
  return res;
}

}  // namespace smpc
