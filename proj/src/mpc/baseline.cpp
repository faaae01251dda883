#include <map>
#include <vector>

#include "smpc/errors.hpp"
#include "smpc/mpc.hpp"

namespace smpc {
namespace {

// Offsets for one prediction length l. Robust: every term worst-case.
// RfTube: the A_cl^0 term (most recent disturbance) by its sampled quantile,
// terms 1..l-1 worst-case. The quantile is taken over bank.last of the same
// bank the proposed tightening uses, so the ordering against it holds sample-wise.
Eigen::VectorXd baseline_rows(const LinearSystem& sys, const Eigen::MatrixXd& K, const Eigen::MatrixXd& rows,
                              const Eigen::VectorXd& rhs, const std::vector<double>& eps, const Eigen::MatrixXd& map,
                              const DisturbanceModel& dist, Mode mode, const ScenarioOptions& opt, int l) {
  const int p = static_cast<int>(rows.rows());
  const Polytope& W = dist.support_polytope();
  Eigen::VectorXd out(p);

  std::map<double, SamplePlan> plans;
  std::int64_t n_max = 0;
  if (mode == Mode::RfTube) {
    for (int j = 0; j < p; ++j) {
      if (eps[j] <= 0.0) continue;
      auto it = plans.find(eps[j]);
      if (it == plans.end()) it = plans.emplace(eps[j], sample_plan(eps[j], opt.beta, opt.band)).first;
      n_max = std::max(n_max, it->second.n_samples);
    }
  }
  ErrorBank bank;
  if (n_max > 0) bank = sample_error_bank(sys, K, dist, l, n_max, opt.seed);

  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd dir = (rows.row(j) * map).transpose();
    if (mode == Mode::Robust || eps[j] <= 0.0) {
      out[j] = rhs[j] - worst_case_sum(sys, K, dir, W, 0, l);
      continue;
    }
    const SamplePlan& plan = plans.at(eps[j]);
    const Eigen::VectorXd vals = (dir.transpose() * bank.last.leftCols(plan.n_samples)).transpose();
    out[j] = rhs[j] - quantile(std::span<const double>(vals.data(), vals.size()), plan.level()) -
             worst_case_sum(sys, K, dir, W, 1, l);
  }
  return out;
}

void require_baseline(Mode mode) {
  if (mode == Mode::Proposed)
    throw Error(ErrorKind::Config, "mpc", "baseline tightening needs mode robust or rf-tube");
}

}  // namespace

Tightening baseline_tightening(const LinearSystem& sys, const Eigen::MatrixXd& K, const ConstraintSpec& spec,
                               const DisturbanceModel& dist, Mode mode, const ScenarioOptions& opt,
                               bool worst_case_inputs) {
  require_baseline(mode);
  const int L = std::max(spec.T - 1, 1);
  Tightening t;
  t.eta.resize(L, spec.p());
  const std::vector<double> eps(spec.eps.data(), spec.eps.data() + spec.eps.size());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(sys.n(), sys.n());
  for (int l = 1; l <= L; ++l)
    t.eta.row(l - 1) = baseline_rows(sys, K, spec.H, spec.h, eps, I, dist, mode, opt, l).transpose();
  t.eta_first = t.eta.row(0).transpose();

  t.mu.resize(spec.T, spec.q());
  if (spec.q() > 0) {
    t.mu.row(0) = spec.g.transpose();
    const std::vector<double> eps_u(spec.q(), spec.eps_u);
    const Mode input_mode = worst_case_inputs ? Mode::Robust : mode;
    for (int l = 1; l < spec.T; ++l)
      t.mu.row(l) = baseline_rows(sys, K, spec.G, spec.g, eps_u, K, dist, input_mode, opt, l).transpose();
  }
  return t;
}

TerminalTightening baseline_terminal(const LinearSystem& sys, const Eigen::MatrixXd& K, const Polytope& terminal_raw,
                                     double eps_T, int T, const DisturbanceModel& dist, Mode mode,
                                     const ScenarioOptions& opt) {
  require_baseline(mode);
  if (terminal_raw.is_empty()) throw Error(ErrorKind::Infeasible, "mpc", "terminal invariant set is empty");
  const std::vector<double> eps(terminal_raw.rows(), eps_T);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(sys.n(), sys.n());
  TerminalTightening out;
  out.eta_T = baseline_rows(sys, K, terminal_raw.A(), terminal_raw.b(), eps, I, dist, mode, opt, T);
  out.terminal = reduce(Polytope(terminal_raw.A(), out.eta_T));
  if (out.terminal.is_empty())
    throw Error(ErrorKind::Infeasible, "mpc", "tightened terminal set of the " + to_string(mode) + " baseline is empty");
  return out;
}

}  // namespace smpc
