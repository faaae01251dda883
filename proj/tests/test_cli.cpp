#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smpc/bundle_io.hpp"
#include "smpc/cli.hpp"
#include "smpc/config.hpp"

using namespace smpc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "smpc_test_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json base_doc() {
  std::ifstream in(std::string(SMPC_SOURCE_DIR) + "/configs/dcdc_feasible_region.json");
  return json::parse(in);
}

// Small and quick: few runs, no grid, no cost estimate.
json quick_doc() {
  json d = base_doc();
  d["run"]["n_runs"] = 20;
  d["run"]["steps"] = 8;
  d["run"]["x0"] = json::array({json::array({0.5, 1.0}), json::array({-1.0, 0.5})});
  d["report"]["grid_resolution"] = 0;
  d["synthesis"]["cost_samples"] = 0;
  return d;
}

std::string write_doc(const json& d, const fs::path& dir, const std::string& name = "cfg.json") {
  const fs::path p = dir / name;
  std::ofstream(p) << d.dump(2);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind parse_error_kind(const json& d) {
  try {
    parse_config(d);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Numerical;  // sentinel: parsed without complaint
}

int run(const std::string& cmd, const CliOptions& opt) {
  std::ostringstream out, err;
  return run_command(cmd, opt, out, err);
}

}  // namespace

TEST_CASE("config parsing rejects malformed documents") {
  CHECK_NOTHROW(parse_config(base_doc()));
  json d = base_doc();
  d.erase("system");
  CHECK(parse_error_kind(d) == ErrorKind::Config);
  d = base_doc();
  d["system"]["B"] = json::array({json::array({1.0})});
  CHECK(parse_error_kind(d) == ErrorKind::Config);
  d = base_doc();
  d["constraints"]["eps"] = json::array({0.2, 0.2, 1.5, 0.2});
  CHECK(parse_error_kind(d) == ErrorKind::Config);
  d = base_doc();
  d["disturbance"]["kind"] = "laplace";
  CHECK(parse_error_kind(d) == ErrorKind::Config);
  d = base_doc();
  d["mpc"]["T"] = "eight";
  CHECK(parse_error_kind(d) == ErrorKind::Config);
  d = base_doc();
  d["schema_version"] = 99;
  CHECK(parse_error_kind(d) == ErrorKind::Config);
  d = base_doc();
  d["run"]["mode"] = "fast";
  CHECK(parse_error_kind(d) == ErrorKind::Config);

  const ScenarioConfig c = parse_config(base_doc());
  CHECK(c.spec.T == 8);
  CHECK(c.spec.p() == 4);
  CHECK(c.run.x0.size() == 1);
  CHECK(c.dist.truncation() == 0.02);
  CHECK(c.synthesis.baseline.robust_form == RobustForm::Tube);
}

TEST_CASE("environment overrides") {
  json d = base_doc();
  apply_env_overrides(d, {"SMPC_RUN__N_RUNS=7", "SMPC_mpc__T=5", "SMPC_RUN__MODE=robust", "HOME=/root",
                          "SMPC_SAMPLING__SEED=12"});
  CHECK(d["run"]["n_runs"] == 7);
  CHECK(d["mpc"]["T"] == 5);
  CHECK(d["run"]["mode"] == "robust");
  CHECK(d["sampling"]["seed"] == 12);
  const ScenarioConfig c = parse_config(d);
  CHECK(c.run.n_runs == 7);
  CHECK(c.spec.T == 5);
  CHECK(c.run.mode == Mode::Robust);
}

TEST_CASE("config hash covers synthesis inputs only") {
  const json a = base_doc();
  json b = json::parse(a.dump());
  CHECK(config_hash(a) == config_hash(b));
  b["run"]["n_runs"] = 5;
  b["report"]["grid_resolution"] = 3;
  CHECK(config_hash(a) == config_hash(b));
  b["system"]["A"][0][1] = 0.0076;
  CHECK(config_hash(a) != config_hash(b));
  json c = a;
  c["sampling"]["beta"] = 1e-3;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("bundle round trip") {
  for (const char* mode : {"proposed", "robust"}) {
    json d = quick_doc();
    d["run"]["mode"] = mode;
    const ScenarioConfig cfg = parse_config(d);
    SynthesisBundle b = synthesize(cfg.sys, cfg.dist, cfg.spec, cfg.Q, cfg.R, cfg.run.mode, cfg.synthesis);
    b.config_hash = config_hash(cfg.raw);
    const SynthesisBundle r = bundle_from_json(json::parse(bundle_to_json(b).dump()));
    CHECK(r.mode == b.mode);
    CHECK(r.tube == b.tube);
    CHECK(r.config_hash == b.config_hash);
    CHECK(r.gains.K == b.gains.K);
    CHECK(r.gains.P == b.gains.P);
    CHECK(r.tight.eta == b.tight.eta);
    CHECK(r.tight.mu == b.tight.mu);
    CHECK(r.tight.eta_first == b.tight.eta_first);
    CHECK(r.sys.A == b.sys.A);
    CHECK(r.dist.covariance() == b.dist.covariance());
    CHECK(r.dist.truncation() == b.dist.truncation());
    CHECK(r.spec.h == b.spec.h);
    CHECK(r.spec.T == b.spec.T);
    CHECK(set_equal(r.sets.X_T, b.sets.X_T, 1e-12));
    CHECK(set_equal(r.sets.Z_T, b.sets.Z_T, 1e-12));
    CHECK(set_equal(r.sets.C_T_inf, b.sets.C_T_inf, 1e-12));
    CHECK(set_equal(r.sets.C_T_inf_x, b.sets.C_T_inf_x, 1e-12));
    if (b.tube) CHECK(set_equal(r.S, b.S, 1e-12));
    // Same controller output from the reloaded bundle.
    const Eigen::Vector2d x(0.4, -0.3);
    CHECK(control_step(r, x).u == control_step(b, x).u);
  }
  CHECK(number_from_json(number_to_json(INFINITY)) == INFINITY);
  CHECK(number_from_json(number_to_json(0.1)) == 0.1);
}

TEST_CASE("CSV layout") {
  const fs::path dir = scratch("csv");
  CliOptions o;
  o.config = write_doc(quick_doc(), dir);
  o.out = (dir / "bundle.json").string();
  REQUIRE(run("synth", o) == 0);
  o.bundle = o.out;
  o.out = (dir / "traj.csv").string();
  o.runs = 3;
  REQUIRE(run("simulate", o) == 0);
  std::istringstream csv(slurp(o.out));
  std::string line;
  std::getline(csv, line);
  CHECK(line ==
        "run,step,x1,x2,u1,qp_status,viol_row_1,viol_row_2,viol_row_3,viol_row_4,stage_cost,prev_seq_feasible");
  int rows = 0;
  std::string last;
  while (std::getline(csv, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 3 * (8 + 1));
  CHECK(last.rfind("2,8,", 0) == 0);
  CHECK(fs::exists(dir / "traj_summary.csv"));

  o.runs = 0;
  REQUIRE(run("simulate", o) == 0);
  const std::string empty = slurp(o.out);
  CHECK(std::count(empty.begin(), empty.end(), '\n') == 1);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorKind::Config) == 2);
  CHECK(exit_code(ErrorKind::Infeasible) == 3);
  CHECK(exit_code(ErrorKind::Unbounded) == 3);
  CHECK(exit_code(ErrorKind::Numerical) == 4);

  const fs::path dir = scratch("exit");
  CliOptions o;
  o.out = (dir / "b.json").string();

  o.config = write_doc(quick_doc(), dir, "ok.json");
  CHECK(run("synth", o) == 0);

  json bad = quick_doc();
  bad["mpc"].erase("Q");
  o.config = write_doc(bad, dir, "bad.json");
  o.out = (dir / "never.json").string();
  CHECK(run("synth", o) == 2);
  CHECK(!fs::exists(o.out));
  CHECK(run("nonsense", o) == 2);

  json tight = quick_doc();
  tight["constraints"]["h"] = json::array({0.01, 0.01, 0.01, 0.01});
  o.config = write_doc(tight, dir, "tight.json");
  CHECK(run("synth", o) == 3);
  CHECK(!fs::exists(o.out));

  json unstab = quick_doc();
  unstab["system"]["A"] = json::array({json::array({1.5, 0.0}), json::array({0.0, 1.5})});
  unstab["system"]["B"] = json::array({json::array({1.0}), json::array({0.0})});
  o.config = write_doc(unstab, dir, "unstab.json");
  CHECK(run("synth", o) == 4);
  CHECK(!fs::exists(o.out));

  // A bundle from another config is refused.
  o.config = write_doc(quick_doc(), dir, "ok.json");
  o.bundle = (dir / "b.json").string();
  json other = quick_doc();
  other["constraints"]["h"][0] = 1.9;
  o.config = write_doc(other, dir, "other.json");
  o.out = (dir / "t.csv").string();
  CHECK(run("simulate", o) == 2);
  CHECK(!fs::exists(o.out));
}

TEST_CASE("the command-line binary") {
  const fs::path dir = scratch("binary");
  const std::string cfg = write_doc(quick_doc(), dir);
  const std::string tool = SMPC_TOOL_PATH;
  const auto status = [&](const std::string& args) {
    const int s = std::system((tool + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status("synth --config " + cfg + " --out " + (dir / "b.json").string()) == 0);
  CHECK(status("simulate --config " + cfg + " --bundle " + (dir / "b.json").string() + " --out " +
               (dir / "t.csv").string() + " --runs 2") == 0);
  CHECK(status("synth --out x.json") == 2);
  CHECK(status("synth --config " + (dir / "missing.json").string() + " --out " + (dir / "x.json").string()) == 2);
  CHECK(status("simulate --config " + cfg + " --bundle " + (dir / "b.json").string() + " --out " +
               (dir / "t.csv").string() + " --mode robust") == 2);
}

TEST_CASE("regions report an infeasible robust design as empty") {
  const fs::path dir = scratch("region");
  json d = quick_doc();
  // The RPI error set reaches about 1.18 along x1: nothing is left for the tube.
  d["constraints"]["h"] = json::array({1.1, 1.1, 3.0, 3.0});
  CliOptions o;
  o.config = write_doc(d, dir);
  o.out = (dir / "region.csv").string();
  std::ostringstream out, err;
  REQUIRE(run_command("region", o, out, err) == 0);
  const std::string areas = slurp(dir / "region_areas.csv");
  CHECK(areas.find("robust,0,1,") != std::string::npos);
  CHECK(areas.find("proposed,0,") == std::string::npos);
}

TEST_CASE("undisturbed regions coincide") {
  const fs::path dir = scratch("zero");
  json d = quick_doc();
  d["disturbance"] = {{"kind", "finite-sample-bank"}, {"samples", json::array({json::array({0.0, 0.0})})}};
  d["synthesis"]["robust_form"] = "tightening";
  CliOptions o;
  o.config = write_doc(d, dir);
  o.out = (dir / "region.csv").string();
  std::ostringstream log;
  const auto res = cmd_region(o, log);
  REQUIRE(res.size() == 3);
  CHECK(res[1].area == doctest::Approx(res[0].area).epsilon(1e-9));
  CHECK(res[2].area == doctest::Approx(res[0].area).epsilon(1e-9));
  CHECK(log.str().find("ratio proposed/rf-tube = 1") != std::string::npos);
}

TEST_CASE("reruns are bitwise identical across worker counts") {
  const fs::path dir = scratch("determinism");
  CliOptions o;
  o.config = write_doc(quick_doc(), dir);
  o.out = (dir / "b.json").string();
  REQUIRE(run("synth", o) == 0);
  const std::string bundle1 = slurp(o.out);
  REQUIRE(run("synth", o) == 0);
  CHECK(slurp(o.out) == bundle1);

  o.bundle = o.out;
  o.seed = 42;
  o.workers = 1;
  o.out = (dir / "w1.csv").string();
  REQUIRE(run("simulate", o) == 0);
  o.workers = 8;
  o.out = (dir / "w8.csv").string();
  REQUIRE(run("simulate", o) == 0);
  o.out = (dir / "w8b.csv").string();
  REQUIRE(run("simulate", o) == 0);
  CHECK(slurp(dir / "w1.csv") == slurp(dir / "w8.csv"));
  CHECK(slurp(dir / "w8.csv") == slurp(dir / "w8b.csv"));
  CHECK(slurp(dir / "w1_summary.csv") == slurp(dir / "w8_summary.csv"));
  o.seed = 43;
  o.out = (dir / "s43.csv").string();
  REQUIRE(run("simulate", o) == 0);
  CHECK(slurp(dir / "s43.csv") != slurp(dir / "w8.csv"));
}
