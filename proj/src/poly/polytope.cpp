#include "smpc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "smpc/errors.hpp"
#include "smpc/lp.hpp"

namespace smpc {

Polytope::Polytope(Eigen::MatrixXd F, Eigen::VectorXd f) : F_(std::move(F)), f_(std::move(f)) {
  if (F_.rows() != f_.size())
    throw Error(ErrorKind::Config, "poly", "row count of F and f disagree");
}

Polytope Polytope::empty(int dim) {
  Polytope p(dim);
  p.empty_ = true;
  return p;
}

Polytope Polytope::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int d = static_cast<int>(lo.size());
  Eigen::MatrixXd F(2 * d, d);
  Eigen::VectorXd f(2 * d);
  F.topRows(d) = Eigen::MatrixXd::Identity(d, d);
  F.bottomRows(d) = -Eigen::MatrixXd::Identity(d, d);
  f.head(d) = hi;
  f.tail(d) = -lo;
  return Polytope(std::move(F), std::move(f));
}

Polytope Polytope::intersect(const Polytope& other) const {
  if (other.dim() != dim()) throw Error(ErrorKind::Config, "poly", "dimension mismatch in intersect");
  if (empty_ || other.empty_) return empty(dim());
  Eigen::MatrixXd F(rows() + other.rows(), dim());
  Eigen::VectorXd f(rows() + other.rows());
  F << F_, other.F_;
  f << f_, other.f_;
  return Polytope(std::move(F), std::move(f));
}

namespace {

Polytope from_rows(const std::vector<Eigen::VectorXd>& rows, const std::vector<double>& rhs, int d) {
  Eigen::MatrixXd F(rows.size(), d);
  Eigen::VectorXd f(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    F.row(i) = rows[i].transpose();
    f[i] = rhs[i];
  }
  return Polytope(std::move(F), std::move(f));
}

Polytope mark_if_empty(Polytope P, double tol) {
  if (P.is_empty() || P.rows() == 0) return P;
  const auto feas = find_feasible_point(P.A(), P.b());
  if (!std::isfinite(feas.max_violation) || feas.max_violation > tol) return Polytope::empty(P.dim());
  return P;
}

}  // namespace

Polytope reduce(const Polytope& P, const NumericSettings& tol) {
  const int d = P.dim();
  if (P.is_empty()) return P;

  // Normalize, drop trivially satisfied zero rows, detect trivially violated ones.
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (int i = 0; i < P.rows(); ++i) {
    const double nrm = P.A().row(i).norm();
    if (nrm <= 1e-12) {
      if (P.b()[i] < -tol.redundancy) return Polytope::empty(d);
      continue;
    }
    Eigen::VectorXd a = P.A().row(i).transpose() / nrm;
    const double bi = P.b()[i] / nrm;
    bool dup = false;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if ((rows[k] - a).lpNorm<Eigen::Infinity>() <= 1e-12) {
        rhs[k] = std::min(rhs[k], bi);
        dup = true;
        break;
      }
    }
    if (!dup) {
      rows.push_back(std::move(a));
      rhs.push_back(bi);
    }
  }
  if (rows.empty()) return Polytope(d);

  Polytope all = from_rows(rows, rhs, d);
  const auto feas = find_feasible_point(all.A(), all.b(), tol);
  if (!feas.feasible || feas.max_violation > tol.redundancy) return Polytope::empty(d);

  // Sequential removal: row i is tested against every row still kept.
  std::vector<char> kept(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int others = static_cast<int>(std::count(kept.begin(), kept.end(), 1)) - 1;
    if (others == 0) break;
    Eigen::MatrixXd F(others, d);
    Eigen::VectorXd f(others);
    int k = 0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (j == i || !kept[j]) continue;
      F.row(k) = rows[j].transpose();
      f[k] = rhs[j];
      ++k;
    }
    const auto lp = solve_lp(F, f, rows[i], tol);
    if (lp.status == LpStatus::Optimal && lp.value <= rhs[i] + tol.redundancy) kept[i] = 0;
  }
  std::vector<Eigen::VectorXd> out_rows;
  std::vector<double> out_rhs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!kept[i]) continue;
    out_rows.push_back(rows[i]);
    out_rhs.push_back(rhs[i]);
  }
  return from_rows(out_rows, out_rhs, d);
}

SupportResult support(const Polytope& P, const Eigen::VectorXd& dir) {
  SupportResult s;
  if (P.is_empty()) {
    s.status = SetStatus::Empty;
    return s;
  }
  const auto lp = solve_lp(P.A(), P.b(), dir);
  switch (lp.status) {
    case LpStatus::Optimal:
      s.value = lp.value;
      s.argmax = lp.x;
      break;
    case LpStatus::Unbounded:
      s.status = SetStatus::Unbounded;
      s.value = std::numeric_limits<double>::infinity();
      break;
    case LpStatus::Infeasible:
      s.status = SetStatus::Empty;
      break;
    case LpStatus::IterationLimit:
      throw Error(ErrorKind::Numerical, "poly", "support LP hit its iteration limit");
  }
  return s;
}

Polytope pontryagin_diff(const Polytope& P, const Polytope& W, const Eigen::MatrixXd& M) {
  if (M.rows() != P.dim() || M.cols() != W.dim())
    throw Error(ErrorKind::Config, "poly", "pontryagin_diff: M has the wrong shape");
  if (P.is_empty()) return P;
  if (W.is_empty()) throw Error(ErrorKind::Config, "poly", "pontryagin_diff: empty disturbance set");
  Eigen::VectorXd f = P.b();
  for (int i = 0; i < P.rows(); ++i) {
    const auto s = support(W, M.transpose() * P.A().row(i).transpose());
    if (s.status == SetStatus::Unbounded)
      throw Error(ErrorKind::Unbounded, "poly", "pontryagin_diff: disturbance set is unbounded");
    if (s.status == SetStatus::Empty)
      throw Error(ErrorKind::Config, "poly", "pontryagin_diff: empty disturbance set");
    f[i] -= s.value;
  }
  return mark_if_empty(Polytope(P.A(), f), kTolerances.redundancy);
}

Polytope affine_preimage(const Polytope& P, const Eigen::MatrixXd& M,
                         const std::optional<Eigen::VectorXd>& offset) {
  if (M.rows() != P.dim()) throw Error(ErrorKind::Config, "poly", "affine_preimage: shape mismatch");
  const int d = static_cast<int>(M.cols());
  if (P.is_empty()) return Polytope::empty(d);
  Eigen::VectorXd f = P.b();
  if (offset) f -= P.A() * (*offset);
  return Polytope(P.A() * M, f);
}

Polytope eliminate(const Polytope& P, int index, const NumericSettings& tol) {
  const int d = P.dim();
  if (index < 0 || index >= d) throw Error(ErrorKind::Config, "poly", "eliminate: index out of range");
  auto drop = [&](const Eigen::VectorXd& a) {
    Eigen::VectorXd out(d - 1);
    out << a.head(index), a.tail(d - 1 - index);
    return out;
  };
  if (P.is_empty()) return Polytope::empty(d - 1);

  std::vector<int> pos, neg;
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (int i = 0; i < P.rows(); ++i) {
    const double a = P.A()(i, index);
    if (std::abs(a) <= 1e-12 * std::max(1.0, P.A().row(i).norm())) {
      rows.push_back(drop(P.A().row(i).transpose()));
      rhs.push_back(P.b()[i]);
    } else if (a > 0) {
      pos.push_back(i);
    } else {
      neg.push_back(i);
    }
  }
  for (int p : pos) {
    const double ap = P.A()(p, index);
    for (int n : neg) {
      const double an = -P.A()(n, index);
      Eigen::VectorXd row = P.A().row(p).transpose() / ap + P.A().row(n).transpose() / an;
      rows.push_back(drop(row));
      rhs.push_back(P.b()[p] / ap + P.b()[n] / an);
    }
  }
  return reduce(from_rows(rows, rhs, d - 1), tol);
}

Polytope project(const Polytope& P, std::span<const int> keep_dims, const NumericSettings& tol) {
  const int d = P.dim();
  std::vector<char> keep(d, 0);
  for (int k : keep_dims) {
    if (k < 0 || k >= d) throw Error(ErrorKind::Config, "poly", "project: index out of range");
    keep[k] = 1;
  }
  // Current column -> original index bookkeeping.
  std::vector<int> cols(d);
  std::iota(cols.begin(), cols.end(), 0);
  Polytope cur = reduce(P, tol);
  for (int i = d - 1; i >= 0; --i) {
    if (keep[i]) continue;
    const auto it = std::find(cols.begin(), cols.end(), i);
    const int pos = static_cast<int>(it - cols.begin());
    cur = eliminate(cur, pos, tol);
    cols.erase(it);
  }
  const int k = static_cast<int>(keep_dims.size());
  if (cur.is_empty()) return Polytope::empty(k);
  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(static_cast<int>(cols.size()), k);
  for (int j = 0; j < k; ++j) {
    const int c = static_cast<int>(std::find(cols.begin(), cols.end(), keep_dims[j]) - cols.begin());
    perm(c, j) = 1.0;
  }
  return Polytope(cur.A() * perm, cur.b());
}

Polytope convex_hull_2d(std::vector<Eigen::Vector2d> pts) {
  if (pts.empty()) return Polytope::empty(2);
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, p.lpNorm<Eigen::Infinity>());
  const double eps = 1e-12 * std::max(scale * scale, 1e-300);
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  const auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
  };
  // Andrew's monotone chain, counter-clockwise, collinear points dropped.
  std::vector<Eigen::Vector2d> h(2 * pts.size() + 1);
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  h.resize(k > 1 ? k - 1 : k);

  const double span = (pts.back() - pts.front()).norm();
  if (h.size() < 3 || span <= 1e-300) {
    // Segment (or point) from the two extreme points.
    const Eigen::Vector2d a = pts.front();
    const Eigen::Vector2d b = pts.back();
    if (span <= 1e-14 * std::max(1.0, scale)) return Polytope::box(a, a);
    const Eigen::Vector2d u = (b - a) / span;
    const Eigen::Vector2d nrm(-u.y(), u.x());
    Eigen::MatrixXd F(4, 2);
    Eigen::VectorXd f(4);
    F << nrm.transpose(), -nrm.transpose(), u.transpose(), -u.transpose();
    f << nrm.dot(a), -nrm.dot(a), u.dot(b), -u.dot(a);
    return Polytope(F, f);
  }
  Eigen::MatrixXd F(h.size(), 2);
  Eigen::VectorXd f(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Eigen::Vector2d e = h[(i + 1) % h.size()] - h[i];
    const Eigen::Vector2d nrm = Eigen::Vector2d(e.y(), -e.x()).normalized();
    F.row(i) = nrm.transpose();
    f[i] = nrm.dot(h[i]);
  }
  return Polytope(F, f);
}

Polytope affine_image(const Polytope& P, const Eigen::MatrixXd& M) {
  if (M.cols() != P.dim()) throw Error(ErrorKind::Config, "poly", "affine_image: dimension mismatch");
  const int k = static_cast<int>(M.rows());
  const int d = P.dim();
  if (P.is_empty()) return Polytope::empty(k);
  if (d == 2 && k == 2 && is_bounded(P)) {
    std::vector<Eigen::Vector2d> pts;
    for (const auto& v : vertices_2d(P)) pts.push_back(M * v);
    return convex_hull_2d(std::move(pts));
  }
  // Variables (y, x): y - M x = 0 and x in P.
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2 * k + P.rows(), k + d);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * k + P.rows());
  F.block(0, 0, k, k).setIdentity();
  F.block(0, k, k, d) = -M;
  F.block(k, 0, k, k) = -Eigen::MatrixXd::Identity(k, k);
  F.block(k, k, k, d) = M;
  F.bottomRightCorner(P.rows(), d) = P.A();
  f.tail(P.rows()) = P.b();
  std::vector<int> keep(k);
  std::iota(keep.begin(), keep.end(), 0);
  return project(Polytope(F, f), keep);
}

Polytope minkowski_sum(const Polytope& P, const Polytope& Q) {
  if (P.dim() != Q.dim()) throw Error(ErrorKind::Config, "poly", "minkowski_sum: dimension mismatch");
  const int d = P.dim();
  if (P.is_empty() || Q.is_empty()) return Polytope::empty(d);
  if (d == 2 && is_bounded(P) && is_bounded(Q)) {
    std::vector<Eigen::Vector2d> pts;
    const auto vq = vertices_2d(Q);
    for (const auto& a : vertices_2d(P))
      for (const auto& b : vq) pts.push_back(a + b);
    return convex_hull_2d(std::move(pts));
  }
  // Variables (x, y): y in P, x - y in Q.
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(P.rows() + Q.rows(), 2 * d);
  Eigen::VectorXd f(P.rows() + Q.rows());
  F.block(0, d, P.rows(), d) = P.A();
  f.head(P.rows()) = P.b();
  F.block(P.rows(), 0, Q.rows(), d) = Q.A();
  F.block(P.rows(), d, Q.rows(), d) = -Q.A();
  f.tail(Q.rows()) = Q.b();
  std::vector<int> keep(d);
  std::iota(keep.begin(), keep.end(), 0);
  return project(Polytope(F, f), keep);
}

bool is_feasible(const Polytope& P, double tol) {
  if (P.is_empty()) return false;
  const auto feas = find_feasible_point(P.A(), P.b());
  return std::isfinite(feas.max_violation) && feas.max_violation <= tol;
}

bool is_bounded(const Polytope& P) {
  if (P.is_empty()) return true;
  for (int i = 0; i < P.dim(); ++i) {
    for (double sgn : {1.0, -1.0}) {
      const auto s = support(P, sgn * Eigen::VectorXd::Unit(P.dim(), i));
      if (s.status == SetStatus::Unbounded) return false;
    }
  }
  return true;
}

std::vector<Eigen::Vector2d> vertices_2d(const Polytope& P) {
  if (P.dim() != 2) throw Error(ErrorKind::Config, "poly", "vertices_2d needs a 2-D polytope");
  const Polytope R = reduce(P);
  if (R.is_empty()) throw Error(ErrorKind::Infeasible, "poly", "vertices_2d: polytope is empty");
  if (!is_bounded(R)) throw Error(ErrorKind::Unbounded, "poly", "vertices_2d: polytope is unbounded");

  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < R.rows(); ++i) {
    for (int j = i + 1; j < R.rows(); ++j) {
      Eigen::Matrix2d M;
      M << R.A().row(i), R.A().row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Eigen::Vector2d v = M.partialPivLu().solve(Eigen::Vector2d(R.b()[i], R.b()[j]));
      if (((R.A() * v) - R.b()).maxCoeff() > 1e-9 * (1.0 + v.norm())) continue;
      const bool dup = std::any_of(pts.begin(), pts.end(),
                                   [&](const Eigen::Vector2d& q) { return (q - v).norm() <= 1e-9; });
      if (!dup) pts.push_back(v);
    }
  }
  if (pts.size() < 3) return pts;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return std::atan2(a.y() - c.y(), a.x() - c.x()) < std::atan2(b.y() - c.y(), b.x() - c.x());
  });
  return pts;
}

double area_2d(const Polytope& P) {
  const auto v = vertices_2d(P);
  if (v.size() < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % v.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

bool contains(const Polytope& P, const Eigen::VectorXd& x, double tol) {
  if (x.size() != P.dim()) throw Error(ErrorKind::Config, "poly", "contains: dimension mismatch");
  if (P.is_empty()) return false;
  if (P.rows() == 0) return true;
  return ((P.A() * x) - P.b()).maxCoeff() <= tol;
}

bool is_subset(const Polytope& P, const Polytope& Q, double tol) {
  if (P.dim() != Q.dim()) throw Error(ErrorKind::Config, "poly", "is_subset: dimension mismatch");
  if (P.is_empty()) return true;
  if (Q.is_empty()) return !is_feasible(P);
  for (int i = 0; i < Q.rows(); ++i) {
    const Eigen::VectorXd a = Q.A().row(i).transpose();
    const auto s = support(P, a);
    if (s.status == SetStatus::Empty) return true;
    if (s.status == SetStatus::Unbounded) return false;
    if (s.value > Q.b()[i] + tol * std::max(1.0, a.norm())) return false;
  }
  return true;
}

bool set_equal(const Polytope& P, const Polytope& Q, double tol) {
  return is_subset(P, Q, tol) && is_subset(Q, P, tol);
}

}  // namespace smpc
