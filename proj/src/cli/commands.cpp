#include "smpc/cli.hpp"

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <set>
#include <ostream>
#include <sstream>

#include "smpc/bundle_io.hpp"

namespace smpc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* status_name(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::NumericalFailure: return "numerical";
  }
  return "unknown";
}

std::string sibling(const std::string& path, const std::string& suffix) {
  const fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix + ".csv")).string();
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorKind::Config, "cli", std::string("missing ") + flag);
}

ScenarioConfig load_with_overrides(const CliOptions& opt) {
  require(opt.config, "--config");
  ScenarioConfig cfg = load_config(opt.config);
  if (opt.mode) cfg.run.mode = *opt.mode;
  if (opt.runs) cfg.run.n_runs = *opt.runs;
  if (opt.steps) cfg.run.steps = *opt.steps;
  if (opt.seed) cfg.run.seed = *opt.seed;
  if (opt.resolution) cfg.report.grid_resolution = *opt.resolution;
  if (cfg.run.n_runs < 0 || cfg.run.steps < 0) throw Error(ErrorKind::Config, "cli", "runs and steps must be non-negative");
  return cfg;
}

SynthesisBundle synth_from(const ScenarioConfig& cfg, Mode mode, const SynthesisOptions& so) {
  SynthesisBundle b = synthesize(cfg.sys, cfg.dist, cfg.spec, cfg.Q, cfg.R, mode, so);
  b.config_hash = config_hash(cfg.raw);
  return b;
}

void print_plans(const ScenarioConfig& cfg, std::ostream& log) {
  std::set<std::pair<std::string, double>> levels;
  for (int j = 0; j < cfg.spec.eps.size(); ++j)
    if (cfg.spec.eps[j] > 0.0) levels.emplace("state", cfg.spec.eps[j]);
  if (cfg.spec.q() > 0 && cfg.spec.eps_u > 0.0) levels.emplace("input", cfg.spec.eps_u);
  if (cfg.spec.eps_T > 0.0) levels.emplace("terminal", cfg.spec.eps_T);
  const auto& sc = cfg.synthesis.scenario;
  for (const auto& [what, eps] : levels) {
    const SamplePlan plan = sample_plan(eps, sc.beta, sc.band);
    log << "sample plan eps=" << eps << " (" << what << "): N_s=" << plan.n_samples << " r=" << plan.discard
        << " certified=[" << plan.band_lo << ", " << plan.band_hi << "]\n";
  }
}

void print_sets(const SynthesisBundle& b, std::ostream& log) {
  log << "mode " << to_string(b.mode) << (b.tube ? " (tube form)" : "") << "\n";
  log << "facets: X_T=" << b.sets.X_T.rows() << " Z_T=" << b.sets.Z_T.rows() << " C_T=" << b.sets.C_T.rows()
      << " C_T_inf=" << b.sets.C_T_inf.rows() << " C_T_inf_x=" << b.sets.C_T_inf_x.rows() << "\n";
  log << "iterations: terminal=" << b.sets.terminal_log.iterations << " first-step=" << b.sets.rci_log.iterations;
  if (b.tube) log << " rpi-terms=" << b.tube_terms;
  log << "\n";
  if (!b.region_bounded) log << "first-step region is unbounded\n";
}

MonteCarloOptions mc_options(const ScenarioConfig& cfg, const CliOptions& opt, bool keep) {
  MonteCarloOptions mo;
  mo.window_row = cfg.report.window_row;
  mo.window_first = cfg.report.window_first;
  mo.window_last = cfg.report.window_last;
  mo.keep_records = keep;
  mo.workers = opt.workers;
  return mo;
}

ViolationStats simulate_into(const SynthesisBundle& bundle, const ScenarioConfig& cfg, const CliOptions& opt,
                             const std::string& out, std::ostream& log) {
  const MonteCarloOptions mo = mc_options(cfg, opt, true);
  MonteCarloResult r;
  if (cfg.run.n_runs > 0) {
    r = monte_carlo(bundle, cfg.run.x0, cfg.run.n_runs, cfg.run.steps, cfg.run.seed, mo);
  } else {
    r.stats = summarize(bundle, {}, cfg.run.steps, mo);
  }
  write_file_atomic(out, trajectory_csv(bundle, r.records));
  write_file_atomic(sibling(out, "_summary"), violation_csv(r.stats));
  const auto& s = r.stats;
  log << "runs=" << s.runs << " steps=" << s.steps << " window_rate(row " << s.window_row + 1 << ", steps "
      << s.window_first << ".." << s.window_last << ")=" << fmt(s.window_rate) << " eps_f=" << fmt(s.eps_f) << " ["
      << fmt(s.eps_f_ci.lo) << ", " << fmt(s.eps_f_ci.hi) << "] infeasible_steps=" << s.infeasible_steps
      << " input_violations=" << s.input_violations << "\n";
  return s;
}

std::vector<RegionResult> region_into(const ScenarioConfig& cfg, const std::string& out, std::ostream& log) {
  SynthesisOptions so = cfg.synthesis;
  so.cost_samples = 0;
  so.allow_unbounded_region = true;
  std::vector<RegionResult> results;
  for (Mode m : {Mode::Proposed, Mode::RfTube, Mode::Robust}) {
    RegionResult r;
    r.mode = m;
    try {
      const SynthesisBundle b = synth_from(cfg, m, so);
      r = feasible_region(b, cfg.report.grid_resolution);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Infeasible) throw;
      r.empty = true;
      r.area = 0.0;
      log << to_string(m) << ": " << e.what() << "\n";
    }
    results.push_back(std::move(r));
  }

  std::ostringstream vx, ar;
  vx << "mode,vertex,x1,x2\n";
  ar << "mode,area,empty,bounded,grid_area\n";
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.vertices.size(); ++i)
      vx << to_string(r.mode) << "," << i << "," << fmt(r.vertices[i][0]) << "," << fmt(r.vertices[i][1]) << "\n";
    ar << to_string(r.mode) << "," << fmt(r.area) << "," << (r.empty ? 1 : 0) << "," << (r.bounded ? 1 : 0) << ","
       << fmt(r.grid_area) << "\n";
    log << "area " << to_string(r.mode) << " = " << fmt(r.area) << (r.empty ? " (empty)" : "")
        << (r.bounded ? "" : " (unbounded)");
    if (r.grid_area >= 0.0) log << " grid=" << fmt(r.grid_area);
    log << "\n";
  }
  write_file_atomic(out, vx.str());
  write_file_atomic(sibling(out, "_areas"), ar.str());
  for (std::size_t i = 1; i < results.size(); ++i) {
    const double den = results[i].area;
    log << "ratio proposed/" << to_string(results[i].mode) << " = "
        << (den > 0.0 ? fmt(results[0].area / den) : std::string("inf")) << "\n";
  }
  return results;
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Infeasible:
    case ErrorKind::Unbounded: return 3;
    case ErrorKind::Numerical: return 4;
  }
  return 4;
}

std::string trajectory_csv(const SynthesisBundle& bundle, const std::vector<RunRecord>& runs) {
  const int n = bundle.sys.n(), m = bundle.sys.m(), p = bundle.spec.p();
  std::ostringstream os;
  os << "run,step";
  for (int i = 0; i < n; ++i) os << ",x" << i + 1;
  for (int i = 0; i < m; ++i) os << ",u" << i + 1;
  os << ",qp_status";
  for (int j = 0; j < p; ++j) os << ",viol_row_" << j + 1;
  os << ",stage_cost,prev_seq_feasible\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const RunRecord& rec = runs[r];
    for (std::size_t k = 0; k < rec.x.size(); ++k) {
      const bool applied = k < rec.u.size();
      os << r << "," << k;
      for (int i = 0; i < n; ++i) os << "," << fmt(rec.x[k][i]);
      for (int i = 0; i < m; ++i) os << "," << (applied ? fmt(rec.u[k][i]) : std::string());
      os << "," << (applied ? status_name(rec.status[k]) : "");
      for (int j = 0; j < p; ++j) os << "," << static_cast<int>(rec.violation[k][j]);
      os << "," << (applied ? fmt(rec.stage_cost[k]) : std::string());
      os << "," << (applied ? std::to_string(rec.prev_feasible[k]) : std::string()) << "\n";
    }
  }
  return os.str();
}

std::string violation_csv(const ViolationStats& s) {
  std::ostringstream os;
  os << "row,step,violation_freq,ci_lo,ci_hi\n";
  for (Eigen::Index j = 0; j < s.freq.cols(); ++j)
    for (Eigen::Index k = 0; k < s.freq.rows(); ++k)
      os << j + 1 << "," << k << "," << fmt(s.freq(k, j)) << "," << fmt(s.ci_lo(k, j)) << "," << fmt(s.ci_hi(k, j))
         << "\n";
  return os.str();
}

SynthesisBundle cmd_synth(const CliOptions& opt, std::ostream& log) {
  const ScenarioConfig cfg = load_with_overrides(opt);
  require(opt.out, "--out");
  print_plans(cfg, log);
  const SynthesisBundle b = synth_from(cfg, cfg.run.mode, cfg.synthesis);
  print_sets(b, log);
  save_bundle(b, opt.out);
  log << "bundle written to " << opt.out << " (config hash " << b.config_hash << ")\n";
  return b;
}

ViolationStats cmd_simulate(const CliOptions& opt, std::ostream& log) {
  const ScenarioConfig cfg = load_with_overrides(opt);
  require(opt.bundle, "--bundle");
  require(opt.out, "--out");
  const SynthesisBundle bundle = load_bundle(opt.bundle);
  const std::string hash = config_hash(cfg.raw);
  if (bundle.config_hash != hash)
    throw Error(ErrorKind::Config, "cli",
                "bundle was synthesized from a different config (hash " + bundle.config_hash + ", config " + hash + ")");
  if (opt.mode && *opt.mode != bundle.mode)
    throw Error(ErrorKind::Config, "cli", "--mode " + to_string(*opt.mode) + " does not match the bundle mode " +
                                              to_string(bundle.mode));
  return simulate_into(bundle, cfg, opt, opt.out, log);
}

std::vector<RegionResult> cmd_region(const CliOptions& opt, std::ostream& log) {
  const ScenarioConfig cfg = load_with_overrides(opt);
  require(opt.out, "--out");
  return region_into(cfg, opt.out, log);
}

void cmd_report(const CliOptions& opt, std::ostream& log) {
  const ScenarioConfig cfg = load_with_overrides(opt);
  require(opt.out, "--out");
  const fs::path dir(opt.out);
  fs::create_directories(dir);

  print_plans(cfg, log);
  const SynthesisBundle b = synth_from(cfg, cfg.run.mode, cfg.synthesis);
  print_sets(b, log);
  save_bundle(b, (dir / "bundle.json").string());
  const ViolationStats s = simulate_into(b, cfg, opt, (dir / "trajectories.csv").string(), log);
  const auto regions = region_into(cfg, (dir / "region.csv").string(), log);

  json rep;
  rep["config_hash"] = b.config_hash;
  rep["mode"] = to_string(b.mode);
  rep["seed"] = cfg.run.seed;
  rep["simulation"] = {{"runs", s.runs},
                       {"steps", s.steps},
                       {"window_row", s.window_row + 1},
                       {"window_first", s.window_first},
                       {"window_last", s.window_last},
                       {"window_rate", s.window_rate},
                       {"eps_f", s.eps_f},
                       {"eps_f_ci", {s.eps_f_ci.lo, s.eps_f_ci.hi}},
                       {"ci_method", s.ci_method},
                       {"infeasible_steps", s.infeasible_steps},
                       {"input_violations", s.input_violations}};
  json areas = json::object();
  for (const auto& r : regions)
    areas[to_string(r.mode)] = {{"area", number_to_json(r.area)}, {"empty", r.empty}, {"bounded", r.bounded}};
  rep["regions"] = areas;
  if (regions[1].area > 0.0) rep["ratio_rf_tube"] = number_to_json(regions[0].area / regions[1].area);
  if (regions[2].area > 0.0) rep["ratio_robust"] = number_to_json(regions[0].area / regions[2].area);
  write_file_atomic((dir / "report.json").string(), rep.dump(2) + "\n");
  log << "report written to " << (dir / "report.json").string() << "\n";
}

int run_command(const std::string& name, const CliOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    if (opt.workers < 0) throw Error(ErrorKind::Config, "cli", "--workers must be >= 0");
    if (opt.workers > 0) omp_set_num_threads(opt.workers);
    if (name == "synth") {
      cmd_synth(opt, out);
    } else if (name == "simulate") {
      cmd_simulate(opt, out);
    } else if (name == "region") {
      cmd_region(opt, out);
    } else if (name == "report") {
      cmd_report(opt, out);
    } else {
      throw Error(ErrorKind::Config, "cli", "unknown command '" + name + "'");
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace smpc
