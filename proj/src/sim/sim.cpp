#include "smpc/sim.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "smpc/errors.hpp"
#include "smpc/lp.hpp"

namespace smpc {

RunRecord closed_loop_run(const SynthesisBundle& bundle, const Eigen::VectorXd& x0, int steps, std::uint64_t seed,
                          const RunOptions& opt) {
  if (steps < 0) throw Error(ErrorKind::Config, "sim", "steps must be non-negative");
  if (x0.size() != bundle.sys.n()) throw Error(ErrorKind::Config, "sim", "initial state has the wrong dimension");
  const auto& sys = bundle.sys;
  const auto& spec = bundle.spec;
  Controller ctl(bundle);
  Rng rng = make_stream(seed, 0);

  RunRecord rec;
  rec.seed = seed;
  rec.x.reserve(steps + 1);
  rec.x.push_back(x0);
  Eigen::VectorXd y_prev;
  bool have_prev = false;
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd& x = rec.x.back();
    Eigen::VectorXd u;
    QpStatus status = QpStatus::Optimal;
    if (opt.lqr_only) {
      u = bundle.gains.K * x;
      rec.prev_feasible.push_back(-1);
      have_prev = false;
    } else {
      if (have_prev) {
        const Eigen::VectorXd cand = ctl.program().shifted_candidate(rec.x[k - 1], y_prev, x);
        rec.prev_feasible.push_back(ctl.is_feasible(x, cand) ? 1 : 0);
      } else {
        rec.prev_feasible.push_back(-1);
      }
      const StepResult res = ctl.step(x, opt.warm_start);
      status = res.status;
      if (res.status == QpStatus::Optimal) {
        u = res.u;
        y_prev = res.y;
        have_prev = true;
      } else {
        u = bundle.gains.K * x;
        ++rec.infeasible_steps;
        have_prev = false;
      }
    }
    rec.status.push_back(status);
    rec.stage_cost.push_back(x.dot(bundle.gains.Q * x) + u.dot(bundle.gains.R * u));
    rec.u.push_back(u);
    rec.x.push_back(sys.A * x + sys.B * u + sys.Bw * bundle.dist.sample(rng));
  }
  rec.violation.resize(rec.x.size());
  for (std::size_t k = 0; k < rec.x.size(); ++k) {
    rec.violation[k].resize(spec.p());
    if (spec.p() == 0) continue;
    const Eigen::VectorXd r = spec.H * rec.x[k] - spec.h;
    for (int j = 0; j < spec.p(); ++j) rec.violation[k][j] = r[j] > 0.0 ? 1 : 0;
  }
  return rec;
}

Interval wilson_interval(std::int64_t k, std::int64_t n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {k <= 0 ? 0.0 : std::max(0.0, center - half), k >= n ? 1.0 : std::min(1.0, center + half)};
}

ViolationStats summarize(const SynthesisBundle& bundle, const std::vector<RunRecord>& runs, int steps,
                         const MonteCarloOptions& opt) {
  const auto& spec = bundle.spec;
  const int p = spec.p();
  ViolationStats st;
  st.runs = static_cast<int>(runs.size());
  st.steps = steps;
  st.window_row = opt.window_row;
  st.window_first = opt.window_first;
  st.window_last = std::min(opt.window_last, steps);

  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(steps + 1, p);
  for (const auto& r : runs) {
    for (int k = 0; k <= steps; ++k)
      for (int j = 0; j < p; ++j) counts(k, j) += r.violation[k][j];
    for (int k = 0; k < steps; ++k) {
      if (r.prev_feasible[k] >= 0) {
        ++st.refeas_checks;
        if (r.prev_feasible[k] == 0) ++st.refeas_failures;
      }
      if (spec.q() > 0 && ((spec.G * r.u[k] - spec.g).array() > 0.0).any()) ++st.input_violations;
    }
    st.infeasible_steps += r.infeasible_steps;
  }
  st.freq = Eigen::MatrixXd::Zero(steps + 1, p);
  st.ci_lo = Eigen::MatrixXd::Zero(steps + 1, p);
  st.ci_hi = Eigen::MatrixXd::Ones(steps + 1, p);
  for (int k = 0; k <= steps; ++k) {
    for (int j = 0; j < p; ++j) {
      const auto c = static_cast<std::int64_t>(counts(k, j));
      if (st.runs > 0) st.freq(k, j) = counts(k, j) / st.runs;
      const Interval ci = wilson_interval(c, st.runs);
      st.ci_lo(k, j) = ci.lo;
      st.ci_hi(k, j) = ci.hi;
    }
  }
  if (p > 0 && st.window_row >= 0 && st.window_row < p && st.window_last >= st.window_first) {
    double s = 0.0;
    for (int k = st.window_first; k <= st.window_last; ++k) s += st.freq(k, st.window_row);
    st.window_rate = s / (st.window_last - st.window_first + 1);
  }
  if (st.refeas_checks > 0)
    st.eps_f = static_cast<double>(st.refeas_failures) / static_cast<double>(st.refeas_checks);
  st.eps_f_ci = wilson_interval(st.refeas_failures, st.refeas_checks);
  return st;
}

namespace {

void check_mc_args(const std::vector<Eigen::VectorXd>& x0s, int n_runs, int steps) {
  if (n_runs < 1 || steps < 0) throw Error(ErrorKind::Config, "sim", "need runs >= 1 and steps >= 0");
  if (x0s.empty()) throw Error(ErrorKind::Config, "sim", "no initial state given");
}

MonteCarloResult finish(const SynthesisBundle& bundle, std::vector<RunRecord> runs, int steps,
                        const MonteCarloOptions& opt) {
  MonteCarloResult out;
  out.stats = summarize(bundle, runs, steps, opt);
  if (opt.keep_records) out.records = std::move(runs);
  return out;
}

}  // namespace

MonteCarloResult monte_carlo(const SynthesisBundle& bundle, const std::vector<Eigen::VectorXd>& x0s, int n_runs,
                             int steps, std::uint64_t base_seed, const MonteCarloOptions& opt) {
  check_mc_args(x0s, n_runs, steps);
  std::vector<RunRecord> runs(n_runs);
  const int workers = opt.workers > 0 ? opt.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int i = 0; i < n_runs; ++i)
    runs[i] = closed_loop_run(bundle, x0s[i % x0s.size()], steps, base_seed + static_cast<std::uint64_t>(i), opt.run);
  return finish(bundle, std::move(runs), steps, opt);
}

MonteCarloResult monte_carlo_serial(const SynthesisBundle& bundle, const std::vector<Eigen::VectorXd>& x0s,
                                    int n_runs, int steps, std::uint64_t base_seed, const MonteCarloOptions& opt) {
  check_mc_args(x0s, n_runs, steps);
  std::vector<RunRecord> runs(n_runs);
  for (int i = 0; i < n_runs; ++i)
    runs[i] = closed_loop_run(bundle, x0s[i % x0s.size()], steps, base_seed + static_cast<std::uint64_t>(i), opt.run);
  return finish(bundle, std::move(runs), steps, opt);
}

std::pair<double, double> expected_disturbance_cost(const SynthesisBundle& bundle, std::int64_t samples,
                                                    std::uint64_t seed) {
  if (samples <= 0) return {0.0, 0.0};
  constexpr std::int64_t kBlock = 4096;
  const std::int64_t blocks = (samples + kBlock - 1) / kBlock;
  std::vector<double> sum(blocks, 0.0), sum_sq(blocks, 0.0);
  const Eigen::MatrixXd M = bundle.sys.Bw.transpose() * bundle.gains.P * bundle.sys.Bw;
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < blocks; ++b) {
    Rng rng = make_stream(seed, 0xB0D0000ULL + static_cast<std::uint64_t>(b));
    const std::int64_t end = std::min(samples, (b + 1) * kBlock);
    for (std::int64_t i = b * kBlock; i < end; ++i) {
      const Eigen::VectorXd w = bundle.dist.sample(rng);
      const double c = w.dot(M * w);
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
  const double mean = s / n;
  const double var = samples > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

AverageCostReport average_cost_check(const SynthesisBundle& bundle, const Eigen::VectorXd& x0, int n_runs,
                                     int horizon_long, std::uint64_t base_seed, int discard,
                                     std::int64_t bound_samples, int workers) {
  if (n_runs < 1 || horizon_long <= discard)
    throw Error(ErrorKind::Config, "sim", "average_cost_check needs runs >= 1 and horizon > discard");
  std::vector<double> means(n_runs, 0.0);
  std::vector<int> infeasible(n_runs, 0);
  std::vector<std::int64_t> input_bad(n_runs, 0);
  std::vector<double> input_excess(n_runs, -INFINITY);
  const auto& spec = bundle.spec;
  const int nthreads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
  for (int i = 0; i < n_runs; ++i) {
    const RunRecord r = closed_loop_run(bundle, x0, horizon_long, base_seed + static_cast<std::uint64_t>(i));
    double s = 0.0;
    for (int k = discard; k < horizon_long; ++k) s += r.x[k].dot(bundle.gains.Q * r.x[k]);
    means[i] = s / (horizon_long - discard);
    infeasible[i] = r.infeasible_steps;
    if (spec.q() > 0)
      for (const auto& u : r.u) {
        const double e = (spec.G * u - spec.g).maxCoeff();
        input_excess[i] = std::max(input_excess[i], e);
        input_bad[i] += e > 0.0;
      }
  }
  AverageCostReport rep;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n_runs; ++i) {
    s += means[i];
    s2 += means[i] * means[i];
    rep.infeasible_steps += infeasible[i];
    rep.input_violations += input_bad[i];
    rep.max_input_excess = std::max(rep.max_input_excess, input_excess[i]);
  }
  rep.average = s / n_runs;
  const double var = n_runs > 1 ? std::max(0.0, (s2 - n_runs * rep.average * rep.average) / (n_runs - 1)) : 0.0;
  rep.average_se = std::sqrt(var / n_runs);
  const auto [bound, bound_se] = expected_disturbance_cost(bundle, bound_samples, base_seed ^ 0x5EEDB0D1ULL);
  rep.bound = bound;
  rep.bound_se = bound_se;
  rep.margin = rep.bound + 3.0 * std::hypot(rep.average_se, rep.bound_se) - rep.average;
  rep.pass = rep.margin >= 0.0;
  return rep;
}

namespace {

bool program_feasible(const OnlineProgram& prog, const Eigen::VectorXd& x) {
  const QpProblem p = prog.build(x);
  if (p.constraints.rows() == 0) return true;
  const auto feas = find_feasible_point(p.constraints.A(), p.constraints.b());
  return feas.feasible && feas.max_violation <= 1e-9;
}

}  // namespace

double grid_volume(const SynthesisBundle& bundle, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                   int resolution) {
  const int n = static_cast<int>(lo.size());
  if (resolution < 1 || n < 1) throw Error(ErrorKind::Config, "sim", "grid needs resolution >= 1");
  const OnlineProgram prog(bundle);
  std::int64_t total = 1;
  for (int i = 0; i < n; ++i) total *= resolution;
  std::int64_t hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(dynamic, 64)
  for (std::int64_t idx = 0; idx < total; ++idx) {
    Eigen::VectorXd x(n);
    std::int64_t rem = idx;
    for (int i = 0; i < n; ++i) {
      const auto c = static_cast<double>(rem % resolution);
      rem /= resolution;
      x[i] = lo[i] + (c + 0.5) * (hi[i] - lo[i]) / resolution;
    }
    if (program_feasible(prog, x)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total) * (hi - lo).prod();
}

RegionResult feasible_region(const SynthesisBundle& bundle, int resolution) {
  RegionResult out;
  out.mode = bundle.mode;
  out.region = reduce(bundle.sets.C_T_inf_x);
  out.empty = out.region.is_empty();
  if (out.empty) {
    out.area = 0.0;
    return out;
  }
  out.bounded = is_bounded(out.region);
  if (!out.bounded) {
    out.area = std::numeric_limits<double>::infinity();
    return out;
  }
  const int n = out.region.dim();
  if (n == 2) {
    out.vertices = vertices_2d(out.region);
    out.area = area_2d(out.region);
  }
  if (resolution > 0) {
    Eigen::VectorXd lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      hi[i] = support(out.region, Eigen::VectorXd::Unit(n, i)).value;
      lo[i] = -support(out.region, -Eigen::VectorXd::Unit(n, i)).value;
      const double pad = 0.01 * (hi[i] - lo[i]) + 1e-9;
      lo[i] -= pad;
      hi[i] += pad;
    }
    out.grid_area = grid_volume(bundle, lo, hi, resolution);
  }
  return out;
}

std::vector<Eigen::VectorXd> sample_initial_states(const Polytope& region, int count, std::uint64_t seed,
                                                   double boundary_fraction, double boundary_gap) {
  const Polytope R = reduce(region);
  if (R.is_empty()) throw Error(ErrorKind::Infeasible, "sim", "cannot sample from an empty region");
  if (!is_bounded(R)) throw Error(ErrorKind::Unbounded, "sim", "cannot sample from an unbounded region");
  const int n = R.dim();
  Eigen::VectorXd lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    hi[i] = support(R, Eigen::VectorXd::Unit(n, i)).value;
    lo[i] = -support(R, -Eigen::VectorXd::Unit(n, i)).value;
  }
  Rng rng = make_stream(seed, 0x1417);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss;
  const auto interior = [&]() {
    for (int tries = 0; tries < 1000000; ++tries) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) x[i] = lo[i] + unif(rng) * (hi[i] - lo[i]);
      if (((R.A() * x - R.b()).array() < 0.0).all()) return x;
    }
    throw Error(ErrorKind::Numerical, "sim", "rejection sampling of the region failed");
  };

  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  const int n_boundary = static_cast<int>(std::lround(boundary_fraction * count));
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x = interior();
    if (i < n_boundary) {
      Eigen::VectorXd d(n);
      for (int j = 0; j < n; ++j) d[j] = gauss(rng);
      d.normalize();
      double t_max = std::numeric_limits<double>::infinity();
      const Eigen::VectorXd ad = R.A() * d;
      const Eigen::VectorXd slack = R.b() - R.A() * x;
      for (int r = 0; r < R.rows(); ++r)
        if (ad[r] > 1e-12) t_max = std::min(t_max, slack[r] / ad[r]);
      const double back = boundary_gap * (0.1 + 0.9 * unif(rng));
      if (std::isfinite(t_max) && t_max > back) x += (t_max - back) * d;
    }
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace smpc
