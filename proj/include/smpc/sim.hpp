#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "smpc/mpc.hpp"

namespace smpc {

/// One closed-loop trajectory. States x_0..x_N, inputs u_0..u_{N-1}.
struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> u;
  std::vector<QpStatus> status;                  ///< per applied step
  std::vector<std::vector<std::uint8_t>> violation;  ///< [k][j]: [H]_j x_k > [h]_j, k = 0..N
  std::vector<double> stage_cost;                ///< |x_k|_Q^2 + |u_k|_R^2
  std::vector<int> prev_feasible;                ///< 1/0, or -1 when there is nothing to test (k = 0)
  int infeasible_steps = 0;
};

struct RunOptions {
  bool warm_start = true;
  bool lqr_only = false;  ///< bypass the MPC and apply u = K x
};

/// x_{k+1} = A x_k + B u_k + Bw w_k with u_k from the receding-horizon
/// controller; w_k drawn from make_stream(seed, 0). On an infeasible program
/// the step falls back to u = K x and the record is marked.
RunRecord closed_loop_run(const SynthesisBundle& bundle, const Eigen::VectorXd& x0, int steps, std::uint64_t seed,
                          const RunOptions& opt = {});

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// 95% Wilson score interval for k successes out of n.
Interval wilson_interval(std::int64_t k, std::int64_t n, double z = 1.959963984540054);

struct ViolationStats {
  int runs = 0;
  int steps = 0;
  Eigen::MatrixXd freq;   ///< (steps + 1) x p, per state x_k
  Eigen::MatrixXd ci_lo;
  Eigen::MatrixXd ci_hi;
  std::string ci_method = "wilson-95";
  int window_row = 0;
  int window_first = 1;
  int window_last = 6;
  double window_rate = 0.0;  ///< mean over the window of freq(k, window_row)
  std::int64_t refeas_checks = 0;
  std::int64_t refeas_failures = 0;
  double eps_f = 0.0;        ///< refeas_failures / refeas_checks
  Interval eps_f_ci;
  std::int64_t infeasible_steps = 0;
  std::int64_t input_violations = 0;  ///< applied steps with some G u > g
};

struct MonteCarloOptions {
  RunOptions run;
  int window_row = 0;
  int window_first = 1;
  int window_last = 6;
  bool keep_records = false;
  int workers = 0;  ///< 0: OpenMP default
};

struct MonteCarloResult {
  ViolationStats stats;
  std::vector<RunRecord> records;  ///< filled when keep_records
};

/// Run i starts at x0s[i % x0s.size()] with seed base_seed + i.
MonteCarloResult monte_carlo(const SynthesisBundle& bundle, const std::vector<Eigen::VectorXd>& x0s, int n_runs,
                             int steps, std::uint64_t base_seed, const MonteCarloOptions& opt = {});
MonteCarloResult monte_carlo_serial(const SynthesisBundle& bundle, const std::vector<Eigen::VectorXd>& x0s,
                                    int n_runs, int steps, std::uint64_t base_seed,
                                    const MonteCarloOptions& opt = {});

/// Aggregate finished runs (order-independent up to the fixed run order).
ViolationStats summarize(const SynthesisBundle& bundle, const std::vector<RunRecord>& runs, int steps,
                         const MonteCarloOptions& opt);

struct AverageCostReport {
  double average = 0.0;     ///< mean over runs and k >= discard of |x_k|_Q^2
  double average_se = 0.0;  ///< across-run standard error
  double bound = 0.0;       ///< E{|Bw w|_P^2}
  double bound_se = 0.0;
  double margin = 0.0;      ///< bound + 3 sqrt(se_avg^2 + se_bound^2) - average
  bool pass = false;
  std::int64_t infeasible_steps = 0;
  std::int64_t input_violations = 0;  ///< applied steps with some G u > g
  double max_input_excess = -INFINITY;  ///< max over applied steps of max_j (G u - g)_j
};

AverageCostReport average_cost_check(const SynthesisBundle& bundle, const Eigen::VectorXd& x0, int n_runs,
                                     int horizon_long, std::uint64_t base_seed, int discard = 50,
                                     std::int64_t bound_samples = 1000000, int workers = 0);

/// Monte-Carlo E{|Bw w|_P^2} with its standard error.
std::pair<double, double> expected_disturbance_cost(const SynthesisBundle& bundle, std::int64_t samples,
                                                    std::uint64_t seed);

struct RegionResult {
  Mode mode = Mode::Proposed;
  Polytope region;
  bool empty = false;
  bool bounded = true;
  double area = 0.0;
  std::vector<Eigen::Vector2d> vertices;  ///< counter-clockwise (2-D only)
  double grid_area = -1.0;                ///< cross-check estimate, -1 when not computed
};

/// Exact first-step region of the bundle and, when resolution > 0, a grid
/// estimate from feasibility of the online program over the bounding box.
RegionResult feasible_region(const SynthesisBundle& bundle, int resolution = 0);

/// Grid estimate alone: fraction of the resolution^n lattice over box
/// [lo, hi] where the online program is feasible, times the box volume.
double grid_volume(const SynthesisBundle& bundle, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                   int resolution);

/// Initial states inside a bounded region: interior points from uniform
/// rejection sampling and, for a fraction of them, points pulled to within
/// boundary_gap of the boundary along a random ray.
std::vector<Eigen::VectorXd> sample_initial_states(const Polytope& region, int count, std::uint64_t seed,
                                                   double boundary_fraction = 0.3, double boundary_gap = 1e-3);

}  // namespace smpc
