#include "smpc/scenario.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "smpc/errors.hpp"

namespace smpc {

double binomial_cdf(std::int64_t k, std::int64_t N, double p) {
  if (k < 0) return 0.0;
  if (k >= N) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  boost::math::binomial_distribution<double> bin(static_cast<double>(N), p);
  return boost::math::cdf(bin, static_cast<double>(k));
}

SamplePlan sample_plan(double eps, double beta, double band) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorKind::Config, "scenario", "sample_plan needs 0 < eps < 1");
  if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorKind::Config, "scenario", "sample_plan needs 0 < beta < 1");
  if (!(band > 0.0 && band < 1.0)) throw Error(ErrorKind::Config, "scenario", "accuracy band must lie in (0,1)");
  const double hi = (1.0 + band) * eps;
  const double lo = (1.0 - band) * eps;
  constexpr std::int64_t kCap = 100'000'000;

  // Normal-approximation estimate; the scan starts well below it.
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - beta / 2.0);
  const double estimate = std::pow(z / band, 2.0) * (1.0 - eps) / eps;
  if (estimate > static_cast<double>(kCap))
    throw Error(ErrorKind::Config, "scenario", "sample size would exceed 1e8; eps/beta/band too tight");
  const std::int64_t start = std::max<std::int64_t>(1, static_cast<std::int64_t>(estimate / 4.0));

  for (std::int64_t N = start; N <= kCap; ++N) {
    const std::int64_t r = std::llround(eps * static_cast<double>(N));
    if (r >= N) continue;
    const double upper = hi >= 1.0 ? 0.0 : binomial_cdf(r, N, hi);
    if (upper > beta / 2.0) continue;
    const double lower = 1.0 - binomial_cdf(r, N, lo);
    if (lower > beta / 2.0) continue;
    return SamplePlan{N, r, eps, beta, lo, hi};
  }
  throw Error(ErrorKind::Config, "scenario", "sample size search exceeded 1e8");
}

double quantile(std::span<const double> values, double level) {
  if (values.empty()) throw Error(ErrorKind::Config, "scenario", "quantile of an empty sample");
  if (!(level > 0.0 && level <= 1.0)) throw Error(ErrorKind::Config, "scenario", "quantile level must lie in (0,1]");
  const auto N = static_cast<std::int64_t>(values.size());
  auto k = static_cast<std::int64_t>(std::ceil(level * static_cast<double>(N) - 1e-9));
  k = std::clamp<std::int64_t>(k, 1, N);
  std::vector<double> v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
  return v[k - 1];
}

namespace {

void fill_block(const LinearSystem& sys, const Eigen::MatrixXd& Acl, const DisturbanceModel& dist, int l,
                std::int64_t begin, std::int64_t end, std::uint64_t seed, std::int64_t block, ErrorBank& bank) {
  Rng rng = make_stream(seed, (static_cast<std::uint64_t>(l) << 32) | static_cast<std::uint64_t>(block));
  Eigen::VectorXd e(sys.n());
  Eigen::VectorXd last(sys.n());
  for (std::int64_t i = begin; i < end; ++i) {
    e.setZero();
    last.setZero();
    for (int step = 0; step < l; ++step) {
      last = sys.Bw * dist.sample(rng);
      e = Acl * e + last;
    }
    bank.e.col(i) = e;
    bank.last.col(i) = last;
  }
}

ErrorBank allocate(int n, std::int64_t N) {
  return ErrorBank{Eigen::MatrixXd(n, N), Eigen::MatrixXd(n, N)};
}

}  // namespace

ErrorBank sample_error_bank_serial(const LinearSystem& sys, const Eigen::MatrixXd& K, const DisturbanceModel& dist,
                                   int l, std::int64_t n_samples, std::uint64_t seed) {
  const Eigen::MatrixXd Acl = sys.A + sys.B * K;
  ErrorBank bank = allocate(sys.n(), n_samples);
  const std::int64_t blocks = (n_samples + kBankBlock - 1) / kBankBlock;
  for (std::int64_t b = 0; b < blocks; ++b)
    fill_block(sys, Acl, dist, l, b * kBankBlock, std::min(n_samples, (b + 1) * kBankBlock), seed, b, bank);
  return bank;
}

ErrorBank sample_error_bank(const LinearSystem& sys, const Eigen::MatrixXd& K, const DisturbanceModel& dist, int l,
                            std::int64_t n_samples, std::uint64_t seed) {
  const Eigen::MatrixXd Acl = sys.A + sys.B * K;
  ErrorBank bank = allocate(sys.n(), n_samples);
  const std::int64_t blocks = (n_samples + kBankBlock - 1) / kBankBlock;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t b = 0; b < blocks; ++b)
    fill_block(sys, Acl, dist, l, b * kBankBlock, std::min(n_samples, (b + 1) * kBankBlock), seed, b, bank);
  return bank;
}

double worst_case_sum(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::VectorXd& row,
                      const Polytope& W, int from, int to) {
  const Eigen::MatrixXd Acl = sys.A + sys.B * K;
  Eigen::RowVectorXd r = row.transpose();
  for (int i = 0; i < from; ++i) r = r * Acl;
  double total = 0.0;
  for (int i = from; i < to; ++i) {
    const auto s = support(W, (r * sys.Bw).transpose());
    if (s.status == SetStatus::Unbounded)
      throw Error(ErrorKind::Unbounded, "scenario", "worst-case tightening needs a bounded disturbance set");
    if (s.status == SetStatus::Empty) throw Error(ErrorKind::Config, "scenario", "empty disturbance set");
    total += s.value;
    r = r * Acl;
  }
  return total;
}

namespace {

// Per-row offsets rhs_j - quantile(row_j' * map * e) over a shared bank for prediction length l.
Eigen::VectorXd tighten_rows(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::MatrixXd& rows,
                             const Eigen::VectorXd& rhs, const std::vector<double>& eps, const Eigen::MatrixXd& map,
                             const DisturbanceModel& dist, const ScenarioOptions& opt, int l) {
  const int p = static_cast<int>(rows.rows());
  Eigen::VectorXd out(p);
  std::map<double, SamplePlan> plans;
  std::int64_t n_max = 0;
  for (int j = 0; j < p; ++j) {
    if (eps[j] <= 0.0) continue;
    auto it = plans.find(eps[j]);
    if (it == plans.end()) it = plans.emplace(eps[j], sample_plan(eps[j], opt.beta, opt.band)).first;
    n_max = std::max(n_max, it->second.n_samples);
  }
  ErrorBank bank;
  if (n_max > 0) bank = sample_error_bank(sys, K, dist, l, n_max, opt.seed);
  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd dir = (rows.row(j) * map).transpose();
    if (eps[j] <= 0.0) {
      out[j] = rhs[j] - worst_case_sum(sys, K, dir, dist.support_polytope(), 0, l);
      continue;
    }
    const SamplePlan& plan = plans.at(eps[j]);
    const Eigen::VectorXd vals = (dir.transpose() * bank.e.leftCols(plan.n_samples)).transpose();
    out[j] = rhs[j] - quantile(std::span<const double>(vals.data(), vals.size()), plan.level());
  }
  return out;
}

}  // namespace

Eigen::MatrixXd tighten_state(const LinearSystem& sys, const Eigen::MatrixXd& K, const ConstraintSpec& spec,
                              const DisturbanceModel& dist, const ScenarioOptions& opt) {
  const int L = std::max(spec.T - 1, 1);
  Eigen::MatrixXd eta(L, spec.p());
  const std::vector<double> eps(spec.eps.data(), spec.eps.data() + spec.eps.size());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(sys.n(), sys.n());
  for (int l = 1; l <= L; ++l) eta.row(l - 1) = tighten_rows(sys, K, spec.H, spec.h, eps, I, dist, opt, l).transpose();
  return eta;
}

Eigen::MatrixXd tighten_input(const LinearSystem& sys, const Eigen::MatrixXd& K, const ConstraintSpec& spec,
                              const DisturbanceModel& dist, const ScenarioOptions& opt) {
  Eigen::MatrixXd mu(spec.T, spec.q());
  if (spec.q() == 0) return mu;
  mu.row(0) = spec.g.transpose();
  const std::vector<double> eps(spec.q(), spec.eps_u);
  for (int l = 1; l < spec.T; ++l) mu.row(l) = tighten_rows(sys, K, spec.G, spec.g, eps, K, dist, opt, l).transpose();
  return mu;
}

TerminalTightening tighten_terminal(const LinearSystem& sys, const Eigen::MatrixXd& K, const Polytope& terminal_raw,
                                    double eps_T, int T, const DisturbanceModel& dist, const ScenarioOptions& opt) {
  if (terminal_raw.is_empty()) throw Error(ErrorKind::Infeasible, "scenario", "terminal invariant set is empty");
  Eigen::MatrixXd map = Eigen::MatrixXd::Identity(sys.n(), sys.n());
  if (opt.terminal_literal_k) {
    if (sys.m() != sys.n())
      throw Error(ErrorKind::Config, "scenario", "literal K form of the terminal tightening needs m == n");
    map = K;
  }
  const std::vector<double> eps(terminal_raw.rows(), eps_T);
  TerminalTightening out;
  out.eta_T = tighten_rows(sys, K, terminal_raw.A(), terminal_raw.b(), eps, map, dist, opt, T);
  out.terminal = reduce(Polytope(terminal_raw.A(), out.eta_T));
  if (out.terminal.is_empty())
    throw Error(ErrorKind::Infeasible, "scenario", "tightened terminal set is empty (eps_T/horizon incompatible)");
  return out;
}

double error_variance(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::VectorXd& row,
                      const Eigen::MatrixXd& Sigma, int l) {
  const Eigen::MatrixXd Acl = sys.A + sys.B * K;
  Eigen::RowVectorXd r = row.transpose();
  double var = 0.0;
  for (int i = 0; i < l; ++i) {
    const Eigen::RowVectorXd c = r * sys.Bw;
    var += c * Sigma * c.transpose();
    r = r * Acl;
  }
  return var;
}

double analytic_gaussian_offset(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::VectorXd& row,
                                double h, const Eigen::MatrixXd& Sigma, int l, double eps) {
  const double sigma = std::sqrt(error_variance(sys, K, row, Sigma, l));
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - eps);
  return h - sigma * z;
}

}  // namespace smpc
