#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

#include "smpc/errors.hpp"
#include "smpc/mpc.hpp"

namespace smpc {

double spectral_radius(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::EigenSolver<Eigen::MatrixXd>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

LqrResult lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                   const Eigen::MatrixXd& R) {
  constexpr int kCap = 100000;
  constexpr double kTol = 1e-12;
  Eigen::MatrixXd P = Q;
  for (int it = 1; it <= kCap; ++it) {
    const Eigen::MatrixXd S = R + B.transpose() * P * B;
    const Eigen::MatrixXd BtPA = B.transpose() * P * A;
    Eigen::MatrixXd next = Q + A.transpose() * P * A - BtPA.transpose() * S.ldlt().solve(BtPA);
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) break;
    const double diff = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (diff <= kTol * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      const Eigen::MatrixXd K = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
      if (spectral_radius(A + B * K) >= 1.0)
        throw Error(ErrorKind::Numerical, "mpc", "LQR closed loop is not Schur stable");
      return {K, P, it};
    }
  }
  throw Error(ErrorKind::Numerical, "mpc", "Riccati iteration did not converge; (A, B) may not be stabilizable");
}

Eigen::MatrixXd dlyap(const Eigen::MatrixXd& Acl, const Eigen::MatrixXd& M) {
  if (spectral_radius(Acl) >= 1.0) throw Error(ErrorKind::Numerical, "mpc", "dlyap: closed loop is not Schur stable");
  // Doubling: after k steps P holds the first 2^k terms of the series.
  Eigen::MatrixXd P = M;
  Eigen::MatrixXd Ak = Acl;
  for (int k = 0; k < 64; ++k) {
    const Eigen::MatrixXd inc = Ak.transpose() * P * Ak;
    P += inc;
    Ak = Ak * Ak;
    if (!P.allFinite()) throw Error(ErrorKind::Numerical, "mpc", "dlyap diverged");
    if (inc.cwiseAbs().maxCoeff() <= 1e-16 * std::max(1.0, P.cwiseAbs().maxCoeff())) break;
  }
  // A few plain fixed-point sweeps clean up rounding.
  for (int k = 0; k < 3; ++k) P = Acl.transpose() * P * Acl + M;
  P = 0.5 * (P + P.transpose());
  const double res = (Acl.transpose() * P * Acl + M - P).cwiseAbs().maxCoeff();
  if (res > 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::Numerical, "mpc", "dlyap residual too large");
  return P;
}

CostConstant cost_constant(const ControllerGains& gains, const LinearSystem& sys, const DisturbanceModel& dist, int T,
                           std::int64_t samples, std::uint64_t seed) {
  const Eigen::MatrixXd Acl = sys.A + sys.B * gains.K;
  const Eigen::MatrixXd W = gains.Q + gains.K.transpose() * gains.R * gains.K;
  CostConstant out;

  if (samples > 0) {
    constexpr std::int64_t kBlock = 4096;
    const std::int64_t blocks = (samples + kBlock - 1) / kBlock;
    std::vector<double> sum(blocks, 0.0), sum_sq(blocks, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t b = 0; b < blocks; ++b) {
      Rng rng = make_stream(seed, 0xC0570000ULL + static_cast<std::uint64_t>(b));
      Eigen::VectorXd e(sys.n());
      const std::int64_t end = std::min(samples, (b + 1) * kBlock);
      for (std::int64_t i = b * kBlock; i < end; ++i) {
        e.setZero();
        double c = 0.0;
        for (int l = 1; l <= T; ++l) {
          e = Acl * e + sys.Bw * dist.sample(rng);
          c += l < T ? e.dot(W * e) : e.dot(gains.P * e);
        }
        sum[b] += c;
        sum_sq[b] += c * c;
      }
    }
    double s = 0.0, s2 = 0.0;
    for (std::int64_t b = 0; b < blocks; ++b) {
      s += sum[b];
      s2 += sum_sq[b];
    }
    const double n = static_cast<double>(samples);
    out.monte_carlo = s / n;
    const double var = samples > 1 ? std::max(0.0, (s2 - n * out.monte_carlo * out.monte_carlo) / (n - 1.0)) : 0.0;
    out.standard_error = std::sqrt(var / n);
  }

  if (dist.kind() == DisturbanceKind::TruncatedGaussian && std::isinf(dist.truncation())) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(sys.n(), sys.n());
    const Eigen::MatrixXd step = sys.Bw * dist.covariance() * sys.Bw.transpose();
    double c = 0.0;
    for (int l = 1; l <= T; ++l) {
      cov = Acl * cov * Acl.transpose() + step;
      c += l < T ? (W * cov).trace() : (gains.P * cov).trace();
    }
    out.gaussian_closed_form = c;
  }
  return out;
}

}  // namespace smpc
