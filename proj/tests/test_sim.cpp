#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "smpc/errors.hpp"
#include "smpc/sim.hpp"

using namespace smpc;

namespace {

DisturbanceModel zero_noise() { return DisturbanceModel::sample_bank({Eigen::Vector2d::Zero()}); }

SynthesisBundle make(const ConstraintSpec& spec, const DisturbanceModel& dist, Mode mode) {
  SynthesisOptions opt;
  opt.cost_samples = 0;
  opt.allow_unbounded_region = true;
  return synthesize(fx::dcdc(), dist, spec, fx::Q(), fx::R(), mode, opt);
}

const SynthesisBundle& box(Mode mode) {
  static std::map<Mode, SynthesisBundle> cache;
  auto it = cache.find(mode);
  if (it == cache.end()) it = cache.emplace(mode, make(fx::box_rows(), fx::dcdc_noise(), mode)).first;
  return it->second;
}

bool same_records(const RunRecord& a, const RunRecord& b) {
  if (a.x.size() != b.x.size() || a.u.size() != b.u.size()) return false;
  for (std::size_t k = 0; k < a.x.size(); ++k)
    if (a.x[k] != b.x[k]) return false;
  for (std::size_t k = 0; k < a.u.size(); ++k)
    if (a.u[k] != b.u[k]) return false;
  return a.status == b.status && a.violation == b.violation && a.stage_cost == b.stage_cost &&
         a.prev_feasible == b.prev_feasible;
}

}  // namespace

TEST_CASE("record layout") {
  const auto& b = box(Mode::Proposed);
  const RunRecord r = closed_loop_run(b, Eigen::Vector2d(0.5, -0.5), 12, 4);
  CHECK(r.x.size() == 13);
  CHECK(r.u.size() == 12);
  CHECK(r.status.size() == 12);
  CHECK(r.violation.size() == 13);
  CHECK(r.stage_cost.size() == 12);
  CHECK(r.prev_feasible.size() == 12);
  CHECK(r.prev_feasible[0] == -1);
  for (std::size_t k = 0; k < r.u.size(); ++k)
    CHECK(r.stage_cost[k] == doctest::Approx(r.x[k].dot(fx::Q() * r.x[k]) + r.u[k].dot(fx::R() * r.u[k])));
  CHECK_THROWS_AS(closed_loop_run(b, Eigen::Vector3d::Zero(), 5, 1), Error);
}

TEST_CASE("undisturbed runs") {
  const SynthesisBundle b = make(fx::box_rows(), zero_noise(), Mode::Proposed);
  const RunRecord r0 = closed_loop_run(b, Eigen::Vector2d::Zero(), 20, 1);
  for (const auto& x : r0.x) CHECK(x.norm() == 0.0);
  for (double c : r0.stage_cost) CHECK(c == 0.0);

  // Where no constraint binds along the way, the closed loop follows the first plan.
  Controller c(b);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> x1(-1.0, 1.0), x2(-1.5, 1.5);
  int compared = 0;
  for (int t = 0; t < 200 && compared < 20; ++t) {
    const Eigen::Vector2d x0(x1(rng), x2(rng));
    const StepResult s = c.step(x0, false);
    if (s.status != QpStatus::Optimal) continue;
    if ((s.v - [&] {
          Eigen::VectorXd lqr(b.spec.T);
          Eigen::VectorXd z = x0;
          for (int l = 0; l < b.spec.T; ++l) {
            lqr.segment(l, 1) = b.gains.K * z;
            z = b.sys.A * z + b.sys.B * lqr.segment(l, 1);
          }
          return lqr;
        }())
            .norm() > 1e-9)
      continue;
    ++compared;
    const RunRecord r = closed_loop_run(b, x0, b.spec.T, 1);
    for (int k = 0; k <= b.spec.T; ++k) CHECK((r.x[k] - s.z[k]).norm() < 1e-9);
  }
  CHECK(compared >= 10);
}

TEST_CASE("parallel and serial Monte Carlo agree exactly") {
  const auto& b = box(Mode::Proposed);
  const std::vector<Eigen::VectorXd> x0s = {Eigen::Vector2d(1.0, 1.5), Eigen::Vector2d(-0.5, 2.0)};
  MonteCarloOptions opt;
  opt.keep_records = true;
  const auto s = monte_carlo_serial(b, x0s, 40, 10, 100, opt);
  opt.workers = 1;
  const auto p1 = monte_carlo(b, x0s, 40, 10, 100, opt);
  opt.workers = 8;
  const auto p8 = monte_carlo(b, x0s, 40, 10, 100, opt);
  REQUIRE(s.records.size() == 40);
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    CHECK(s.records[i].seed == 100 + i);
    CHECK(same_records(s.records[i], p1.records[i]));
    CHECK(same_records(s.records[i], p8.records[i]));
  }
  CHECK(s.stats.freq == p8.stats.freq);
  CHECK(s.stats.window_rate == p8.stats.window_rate);
  CHECK(s.stats.refeas_failures == p8.stats.refeas_failures);
  // Run i starts from x0s[i % 2] with seed base + i.
  const RunRecord r5 = closed_loop_run(b, x0s[1], 10, 105);
  CHECK(same_records(r5, s.records[5]));
  CHECK_THROWS_AS(monte_carlo(b, x0s, 0, 10, 1), Error);
}

TEST_CASE("Wilson interval solves its defining quadratic") {
  const double z = 1.959963984540054;
  for (std::int64_t n : {1, 10, 137, 10000})
    for (std::int64_t k = 0; k <= n; k += std::max<std::int64_t>(1, n / 7)) {
      const Interval ci = wilson_interval(k, n);
      const double ph = static_cast<double>(k) / n;
      CHECK(ci.lo <= ph + 1e-15);
      CHECK(ci.hi >= ph - 1e-15);
      CHECK(ci.lo >= 0.0);
      CHECK(ci.hi <= 1.0);
      for (double p : {ci.lo, ci.hi}) CHECK(std::abs((ph - p) * (ph - p) - z * z * p * (1 - p) / n) < 1e-12);
    }
  CHECK(wilson_interval(0, 50).lo == 0.0);
  CHECK(wilson_interval(50, 50).hi == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("zero-eps rows are never violated under the robust controller") {
  ConstraintSpec spec = fx::box_rows();
  spec.eps.setZero();
  const SynthesisBundle b = make(spec, fx::dcdc_noise(), Mode::Robust);
  const auto x0s = sample_initial_states(b.sets.C_T_inf_x, 20, 8);
  const auto mc = monte_carlo(b, x0s, 200, 15, 9);
  CHECK(mc.stats.freq.maxCoeff() == 0.0);
  CHECK(mc.stats.infeasible_steps == 0);
  CHECK(mc.stats.input_violations == 0);
}

TEST_CASE("local feedback alone violates the single constraint early") {
  const SynthesisBundle b = make(fx::single_row(), fx::dcdc_noise(), Mode::Proposed);
  MonteCarloOptions opt;
  opt.run.lqr_only = true;
  const auto mc = monte_carlo(b, {Eigen::Vector2d(2.5, 2.8)}, 1000, 15, 1, opt);
  for (int k = 0; k < 3; ++k) CHECK(mc.stats.freq(k, 0) == 1.0);
  CHECK(mc.stats.refeas_checks == 0);
}

TEST_CASE("refeasibility failure rate") {
  const auto& b = box(Mode::Proposed);
  const auto x0s = sample_initial_states(b.sets.C_T_inf_x, 50, 3);
  const auto loose = monte_carlo(b, x0s, 500, 15, 7);
  CHECK(loose.stats.eps_f >= 0.0);
  CHECK(loose.stats.eps_f <= 1.0);
  CHECK(loose.stats.refeas_checks == 500 * 14);
  CHECK(loose.stats.eps_f_ci.lo <= loose.stats.eps_f);
  CHECK(loose.stats.eps_f_ci.hi >= loose.stats.eps_f);
  CHECK(loose.stats.infeasible_steps == 0);

  ConstraintSpec spec = fx::box_rows();
  spec.eps_u = 0.01;
  spec.eps_T = 0.01;
  const SynthesisBundle tb = make(spec, fx::dcdc_noise(), Mode::Proposed);
  const auto tight = monte_carlo(tb, x0s, 500, 15, 7);
  MESSAGE("eps_f " << loose.stats.eps_f << " -> " << tight.stats.eps_f);
  CHECK(tight.stats.eps_f <= loose.stats.eps_f);
}

TEST_CASE("average cost against the disturbance bound") {
  const SynthesisBundle z = make(fx::box_rows(), zero_noise(), Mode::Proposed);
  const AverageCostReport r0 = average_cost_check(z, Eigen::Vector2d::Zero(), 5, 120, 1, 50, 1000);
  CHECK(r0.average == 0.0);
  CHECK(r0.bound == 0.0);
  CHECK(r0.pass);
  CHECK(average_cost_check(z, Eigen::Vector2d(0.5, 0.5), 5, 120, 1, 50, 1000).average < 1e-12);

  // Doubling the noise quadruples the bound. A loose row keeps the terminal
  // set nonempty at that level.
  ConstraintSpec loose = fx::single_row();
  loose.h[0] = 10.0;
  const SynthesisBundle b1 = make(loose, fx::dcdc_noise(), Mode::Proposed);
  const SynthesisBundle b2 = make(loose, fx::dcdc_noise(2.0), Mode::Proposed);
  const AverageCostReport a = average_cost_check(b1, Eigen::Vector2d::Zero(), 50, 250, 1, 50, 200000);
  const AverageCostReport c = average_cost_check(b2, Eigen::Vector2d::Zero(), 50, 250, 1, 50, 200000);
  CHECK(a.pass);
  CHECK(c.pass);
  CHECK(a.infeasible_steps == 0);
  CHECK(c.infeasible_steps == 0);
  CHECK(c.bound / a.bound == doctest::Approx(4.0).epsilon(0.02));
  CHECK(c.average / a.average == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("feasible regions are nested") {
  const RegionResult p = feasible_region(box(Mode::Proposed));
  const RegionResult f = feasible_region(box(Mode::RfTube));
  const RegionResult r = feasible_region(box(Mode::Robust));
  CHECK(is_subset(r.region, f.region));
  CHECK(is_subset(f.region, p.region));
  CHECK(r.area < f.area);
  CHECK(f.area < p.area);
  CHECK(p.vertices.size() >= 3);

  // Without disturbance the tightenings vanish: rf-tube and the tightening-form
  // robust controller give the proposed region. The tube form also constrains
  // the current state, so its region sits inside.
  const SynthesisBundle zp = make(fx::box_rows(), zero_noise(), Mode::Proposed);
  const SynthesisBundle zf = make(fx::box_rows(), zero_noise(), Mode::RfTube);
  SynthesisOptions opt;
  opt.cost_samples = 0;
  opt.baseline.robust_form = RobustForm::Tightening;
  const SynthesisBundle zr = synthesize(fx::dcdc(), zero_noise(), fx::box_rows(), fx::Q(), fx::R(), Mode::Robust, opt);
  const SynthesisBundle zt = make(fx::box_rows(), zero_noise(), Mode::Robust);
  const RegionResult a = feasible_region(zp), b = feasible_region(zf), c = feasible_region(zr);
  CHECK(set_equal(a.region, b.region));
  CHECK(set_equal(a.region, c.region));
  CHECK(b.area == doctest::Approx(a.area).epsilon(1e-9));
  const RegionResult t = feasible_region(zt);
  CHECK(is_subset(t.region, a.region));
}

TEST_CASE("grid estimate tracks the exact area") {
  const RegionResult p = feasible_region(box(Mode::Proposed), 60);
  CHECK(std::abs(p.grid_area - p.area) < 0.05 * p.area);
}

TEST_CASE("sampled initial states") {
  const Polytope& R = box(Mode::Proposed).sets.C_T_inf_x;
  const auto xs = sample_initial_states(R, 100, 5, 0.3, 1e-3);
  REQUIRE(xs.size() == 100);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double gap = INFINITY;
    for (int j = 0; j < R.rows(); ++j) gap = std::min(gap, (R.b()[j] - R.A().row(j).dot(xs[i])) / R.A().row(j).norm());
    CHECK(gap >= 0.0);
    if (i < 30) CHECK(gap <= 1e-3 + 1e-12);
  }
  CHECK_THROWS_AS(sample_initial_states(Polytope(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)), 5, 1), Error);
}
