#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "smpc/polytope.hpp"

namespace smpc {

/// x+ = A x + B u + Bw w.
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Bw;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int mw() const { return static_cast<int>(Bw.cols()); }

  /// Throws Error(Config) on inconsistent shapes.
  void validate() const;
};

/// Probabilistic state rows (H x <= h w.p. >= 1 - eps_j), hard input rows
/// (G u <= g), prediction-side input and terminal violation levels, horizon.
struct ConstraintSpec {
  Eigen::MatrixXd H;
  Eigen::VectorXd h;
  Eigen::VectorXd eps;
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  double eps_u = 0.0;
  double eps_T = 0.0;
  int T = 1;

  int p() const { return static_cast<int>(H.rows()); }
  int q() const { return static_cast<int>(G.rows()); }

  void validate(const LinearSystem& sys) const;
};

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream id); used to partition Monte-Carlo work
/// so results do not depend on how it is scheduled.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

enum class DisturbanceKind { TruncatedGaussian, SampleBank };

/// Zero-mean i.i.d. disturbance law with a bounded polytopic outer set.
class DisturbanceModel {
 public:
  /// Gaussian N(0, covariance) conditioned on |w|^2 <= truncation (may be +inf).
  /// outer_facets sets the facet count of the 2-D circumscribed polygon.
  static DisturbanceModel truncated_gaussian(const Eigen::MatrixXd& covariance, double truncation,
                                             int outer_facets = 8);

  /// Uniform resampling with replacement from recorded disturbance vectors.
  static DisturbanceModel sample_bank(std::vector<Eigen::VectorXd> samples);

  DisturbanceKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  double truncation() const { return truncation_; }
  int outer_facets() const { return outer_facets_; }
  const std::vector<Eigen::VectorXd>& bank() const { return bank_; }

  /// Outer approximation of the support; unbounded for an untruncated gaussian.
  const Polytope& support_polytope() const { return support_; }

  /// Copy with every sample multiplied by s (covariance by s^2, truncation by s^2).
  DisturbanceModel scaled(double s) const;

  /// One draw. Rejection sampling; throws Error(Config) after 1e6 consecutive rejections.
  Eigen::VectorXd sample(Rng& rng) const;

 private:
  DisturbanceKind kind_ = DisturbanceKind::TruncatedGaussian;
  int dim_ = 0;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_;
  double truncation_ = 0.0;
  int outer_facets_ = 8;
  std::vector<Eigen::VectorXd> bank_;
  Polytope support_;
};

/// Outer polytope of the ball |w|^2 <= radius^2: a regular k-gon in 2-D, an
/// interval in 1-D, box plus cross-polytope facets (at most 64) above that.
Polytope ball_outer_polytope(int dim, double radius, int facets_2d = 8);

/// e_1..e_T of e+ = (A + B K) e + Bw w, e_0 = 0.
std::vector<Eigen::VectorXd> propagate_error(const LinearSystem& sys, const Eigen::MatrixXd& K,
                                             std::span<const Eigen::VectorXd> w_seq);

}  // namespace smpc
