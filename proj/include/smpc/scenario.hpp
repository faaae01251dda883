#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "smpc/model.hpp"
#include "smpc/polytope.hpp"

namespace smpc {

/// Sample count and discard count for one scalar chance program.
struct SamplePlan {
  std::int64_t n_samples = 0;
  std::int64_t discard = 0;
  double eps = 0.0;
  double beta = 0.0;
  double band_lo = 0.0;  ///< lower end of the certified violation interval
  double band_hi = 0.0;  ///< upper end
  double level() const { return 1.0 - static_cast<double>(discard) / static_cast<double>(n_samples); }
};

/// Smallest N (scanning upward) with r = round(eps N) such that
///   P{Bin(N, (1+band) eps) <= r}     <= beta / 2   and
///   P{Bin(N, (1-band) eps) >= r + 1} <= beta / 2,
/// i.e. the sampled solution violates with probability in
/// [(1-band) eps, (1+band) eps] at confidence 1 - beta.
SamplePlan sample_plan(double eps, double beta, double band = 0.05);

/// Lower binomial tail P{Bin(N, p) <= k}.
double binomial_cdf(std::int64_t k, std::int64_t N, double p);

/// Element at 1-based index ceil(level N) of the ascending order.
double quantile(std::span<const double> values, double level);

/// Offline nominal-constraint offsets and terminal set.
struct Tightening {
  Eigen::MatrixXd eta;        ///< (T-1) x p; row l-1 holds eta_l
  Eigen::MatrixXd mu;         ///< T x q; row l holds mu_l, row 0 equals g
  Eigen::VectorXd eta_first;  ///< eta_1 (also defined when T = 1); feeds the terminal set
  Eigen::MatrixXd H_T;        ///< terminal rows (from the invariant set)
  Eigen::VectorXd h_T;
  Eigen::VectorXd eta_T;
  Polytope terminal;          ///< Z_T = reduce({H_T z <= eta_T})
};

/// Samples of the error state e_l (columns), with the contribution of the
/// most recent disturbance Bw w_{l-1} kept alongside.
struct ErrorBank {
  Eigen::MatrixXd e;     ///< n x N
  Eigen::MatrixXd last;  ///< n x N
};

/// Samples are produced in fixed-size blocks, block b drawing from
/// make_stream(seed, (l << 32) | b); both kernels give identical banks.
inline constexpr int kBankBlock = 4096;
ErrorBank sample_error_bank(const LinearSystem& sys, const Eigen::MatrixXd& K, const DisturbanceModel& dist,
                            int l, std::int64_t n_samples, std::uint64_t seed);
ErrorBank sample_error_bank_serial(const LinearSystem& sys, const Eigen::MatrixXd& K,
                                   const DisturbanceModel& dist, int l, std::int64_t n_samples,
                                   std::uint64_t seed);

struct ScenarioOptions {
  double beta = 1e-4;
  double band = 0.05;
  std::uint64_t seed = 1;
  bool terminal_literal_k = false;  ///< use [H_T]_j K e_T (needs m == n) instead of [H_T]_j e_T
};

/// Offsets eta_l for l = 1..max(T-1, 1); rows with eps_j = 0 use the worst case over W.
Eigen::MatrixXd tighten_state(const LinearSystem& sys, const Eigen::MatrixXd& K, const ConstraintSpec& spec,
                              const DisturbanceModel& dist, const ScenarioOptions& opt);

/// Offsets mu_l for l = 0..T-1; mu_0 = g.
Eigen::MatrixXd tighten_input(const LinearSystem& sys, const Eigen::MatrixXd& K, const ConstraintSpec& spec,
                              const DisturbanceModel& dist, const ScenarioOptions& opt);

struct TerminalTightening {
  Eigen::VectorXd eta_T;
  Polytope terminal;
};

/// eta_T from horizon-T error samples against the rows of terminal_raw; throws
/// Error(Infeasible) if the tightened terminal set is empty.
TerminalTightening tighten_terminal(const LinearSystem& sys, const Eigen::MatrixXd& K, const Polytope& terminal_raw,
                                    double eps_T, int T, const DisturbanceModel& dist, const ScenarioOptions& opt);

/// Variance of [H]_j e_l for a gaussian (untruncated) disturbance with covariance Sigma.
double error_variance(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::VectorXd& row,
                      const Eigen::MatrixXd& Sigma, int l);

/// h - sigma_l Phi^{-1}(1 - eps) for the untruncated gaussian.
double analytic_gaussian_offset(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::VectorXd& row,
                                double h, const Eigen::MatrixXd& Sigma, int l, double eps);

/// sum_{i=from}^{to-1} max_{w in W} row' A_cl^i Bw w.
double worst_case_sum(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::VectorXd& row,
                      const Polytope& W, int from, int to);

}  // namespace smpc
