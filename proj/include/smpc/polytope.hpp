#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

#include "smpc/settings.hpp"

namespace smpc {

/// Halfspace-represented polyhedron {x : F x <= f}.
///
/// The representation may be redundant. Emptiness is an explicit flag set by
/// operations that prove it; a Polytope is never stored with inconsistent rows
/// standing in for the empty set.
class Polytope {
 public:
  Polytope() = default;
  explicit Polytope(int dim) : F_(0, dim), f_(0) {}
  Polytope(Eigen::MatrixXd F, Eigen::VectorXd f);

  static Polytope universe(int dim) { return Polytope(dim); }
  static Polytope empty(int dim);
  static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  int dim() const { return static_cast<int>(F_.cols()); }
  int rows() const { return static_cast<int>(F_.rows()); }
  const Eigen::MatrixXd& A() const { return F_; }
  const Eigen::VectorXd& b() const { return f_; }

  /// True only if an operation has proven the set empty.
  bool is_empty() const { return empty_; }

  /// Stack the rows of another polytope of the same dimension.
  Polytope intersect(const Polytope& other) const;

 private:
  Eigen::MatrixXd F_;
  Eigen::VectorXd f_;
  bool empty_ = false;
};

enum class SetStatus { Ok, Empty, Unbounded };

struct SupportResult {
  SetStatus status = SetStatus::Ok;
  double value = 0.0;
  Eigen::VectorXd argmax;
};

/// Irredundant, row-normalized representation of the same point set.
Polytope reduce(const Polytope& P, const NumericSettings& tol = kTolerances);

/// max_{x in P} dir' x.
SupportResult support(const Polytope& P, const Eigen::VectorXd& dir);

/// {x : x + M w in P for all w in W}, by per-facet support offsets.
Polytope pontryagin_diff(const Polytope& P, const Polytope& W, const Eigen::MatrixXd& M);

/// {x : M x + offset in P}.
Polytope affine_preimage(const Polytope& P, const Eigen::MatrixXd& M,
                         const std::optional<Eigen::VectorXd>& offset = std::nullopt);

/// Convex hull of planar points; a segment or a point gives a flat polytope.
Polytope convex_hull_2d(std::vector<Eigen::Vector2d> pts);

/// {M x : x in P}. Vertex mapping in 2-D, lifting and projection otherwise.
Polytope affine_image(const Polytope& P, const Eigen::MatrixXd& M);

/// P + Q. Bounded 2-D inputs go through the vertex hull; anything else is
/// lifted to {(x, y) : y in P, x - y in Q} and projected.
Polytope minkowski_sum(const Polytope& P, const Polytope& Q);

/// Exact shadow on the kept coordinates (in the given order) by Fourier-Motzkin.
Polytope project(const Polytope& P, std::span<const int> keep_dims,
                 const NumericSettings& tol = kTolerances);

/// Fourier-Motzkin elimination of a single coordinate; the result drops that coordinate.
Polytope eliminate(const Polytope& P, int index, const NumericSettings& tol = kTolerances);

/// Counter-clockwise vertex cycle of a bounded nonempty 2-D polytope.
std::vector<Eigen::Vector2d> vertices_2d(const Polytope& P);
double area_2d(const Polytope& P);

/// Point-free bounded check: finite support along +/- every coordinate axis.
bool is_bounded(const Polytope& P);

/// Feasibility check by LP (sets the explicit emptiness question aside).
bool is_feasible(const Polytope& P, double tol = kTolerances.redundancy);

bool contains(const Polytope& P, const Eigen::VectorXd& x, double tol = 1e-9);
bool is_subset(const Polytope& P, const Polytope& Q, double tol = 1e-9);
bool set_equal(const Polytope& P, const Polytope& Q, double tol = 1e-9);

}  // namespace smpc
