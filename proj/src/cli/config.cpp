#include "smpc/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

#include "smpc/bundle_io.hpp"
#include "smpc/errors.hpp"

extern char** environ;

namespace smpc {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::Config, "config", what); }

const json& need(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad("missing key '" + where + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& key) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    bad("'" + key + "' must be a number");
  }
  if (!j.is_number()) bad("'" + key + "' must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& key) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) bad("'" + key + "' must be an integer");
  return j.get<int>();
}

bool lower_equal(const std::string& a, const std::string& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

template <class T>
T get_or(const json& block, const std::string& key, T fallback) {
  if (!block.is_object() || !block.contains(key)) return fallback;
  return block.at(key).get<T>();
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(number_to_json(M(i, j)));
    rows.push_back(std::move(r));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(number_to_json(v[i]));
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& key) {
  if (!j.is_array()) bad("'" + key + "' must be an array of rows");
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  // A flat array is read as a single column.
  if (!j[0].is_array()) {
    Eigen::MatrixXd M(rows, 1);
    for (int i = 0; i < rows; ++i) M(i, 0) = number(j[i], key);
    return M;
  }
  const int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols) bad("'" + key + "' has ragged rows");
    for (int c = 0; c < cols; ++c) M(i, c) = number(j[i][c], key);
  }
  return M;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& key) {
  if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
  if (!j.is_array()) bad("'" + key + "' must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = number(j[i], key);
  return v;
}

ScenarioConfig parse_config(const json& doc) {
  if (!doc.is_object()) bad("document must be an object");
  const int version = integer(need(doc, "schema_version", ""), "schema_version");
  if (version != kConfigSchemaVersion)
    bad("unsupported schema_version " + std::to_string(version) + " (expected " +
        std::to_string(kConfigSchemaVersion) + ")");

  ScenarioConfig cfg;
  cfg.raw = doc;
  try {
    const json& sys = need(doc, "system", "");
    cfg.sys.A = matrix_from_json(need(sys, "A", "system."), "system.A");
    cfg.sys.B = matrix_from_json(need(sys, "B", "system."), "system.B");
    cfg.sys.Bw = sys.contains("Bw") ? matrix_from_json(sys.at("Bw"), "system.Bw")
                                    : Eigen::MatrixXd::Identity(cfg.sys.A.rows(), cfg.sys.A.rows());
    cfg.sys.validate();
    const int n = cfg.sys.n(), m = cfg.sys.m(), mw = cfg.sys.mw();

    const json& dist = need(doc, "disturbance", "");
    const std::string kind = get_or<std::string>(dist, "kind", "truncated-gaussian");
    if (kind == "truncated-gaussian") {
      const Eigen::MatrixXd sigma = matrix_from_json(need(dist, "sigma", "disturbance."), "disturbance.sigma");
      if (sigma.rows() != mw || sigma.cols() != mw) bad("disturbance.sigma must be m_w x m_w");
      const double trunc = dist.contains("truncation") && !dist.at("truncation").is_null() ? number(dist.at("truncation"), "disturbance.truncation")
                                                       : std::numeric_limits<double>::infinity();
      const int facets = dist.contains("outer_facets") ? integer(dist.at("outer_facets"), "disturbance.outer_facets") : 8;
      cfg.dist = DisturbanceModel::truncated_gaussian(sigma, trunc, facets);
    } else if (kind == "finite-sample-bank") {
      const Eigen::MatrixXd s = matrix_from_json(need(dist, "samples", "disturbance."), "disturbance.samples");
      if (s.cols() != mw) bad("disturbance.samples rows must have m_w entries");
      std::vector<Eigen::VectorXd> bank;
      for (int i = 0; i < s.rows(); ++i) bank.push_back(s.row(i).transpose());
      cfg.dist = DisturbanceModel::sample_bank(std::move(bank));
    } else {
      bad("disturbance.kind must be truncated-gaussian or finite-sample-bank");
    }

    const json& con = need(doc, "constraints", "");
    auto& spec = cfg.spec;
    spec.H = con.contains("H") ? matrix_from_json(con.at("H"), "constraints.H") : Eigen::MatrixXd(0, n);
    if (spec.H.size() == 0) spec.H.resize(0, n);
    spec.h = con.contains("h") ? vector_from_json(con.at("h"), "constraints.h") : Eigen::VectorXd(0);
    spec.eps = con.contains("eps") ? vector_from_json(con.at("eps"), "constraints.eps")
                                   : Eigen::VectorXd::Zero(spec.h.size());
    spec.G = con.contains("G") ? matrix_from_json(con.at("G"), "constraints.G") : Eigen::MatrixXd(0, m);
    if (spec.G.size() == 0) spec.G.resize(0, m);
    spec.g = con.contains("g") ? vector_from_json(con.at("g"), "constraints.g") : Eigen::VectorXd(0);
    spec.eps_u = get_or<double>(con, "eps_u", 0.0);
    spec.eps_T = get_or<double>(con, "eps_T", 0.0);

    const json& mpc = need(doc, "mpc", "");
    cfg.Q = matrix_from_json(need(mpc, "Q", "mpc."), "mpc.Q");
    cfg.R = matrix_from_json(need(mpc, "R", "mpc."), "mpc.R");
    spec.T = integer(need(mpc, "T", "mpc."), "mpc.T");
    spec.validate(cfg.sys);
    if (cfg.Q.rows() != n || cfg.Q.cols() != n) bad("mpc.Q must be n x n");
    if (cfg.R.rows() != m || cfg.R.cols() != m) bad("mpc.R must be m x m");

    const json samp = doc.value("sampling", json::object());
    auto& sc = cfg.synthesis.scenario;
    sc.beta = get_or<double>(samp, "beta", 1e-4);
    sc.band = get_or<double>(samp, "accuracy_band", 0.05);
    sc.seed = get_or<std::uint64_t>(samp, "seed", 1);

    const json syn = doc.value("synthesis", json::object());
    sc.terminal_literal_k = get_or<bool>(syn, "terminal_literal_k", false);
    cfg.synthesis.allow_unbounded_region = get_or<bool>(syn, "allow_unbounded_region", false);
    cfg.synthesis.cost_samples = get_or<std::int64_t>(syn, "cost_samples", 100000);
    cfg.synthesis.sets.max_iterations = get_or<int>(syn, "max_set_iterations", 500);
    cfg.synthesis.baseline.robust_form = robust_form_from_string(get_or<std::string>(syn, "robust_form", "tube"));
    cfg.synthesis.baseline.rf_worst_case_inputs = get_or<bool>(syn, "rf_worst_case_inputs", true);
    cfg.synthesis.baseline.tube_alpha = get_or<double>(syn, "tube_alpha", 1e-4);

    const json run = doc.value("run", json::object());
    if (run.contains("x0")) {
      const json& x0 = run.at("x0");
      if (x0.is_array() && !x0.empty() && x0[0].is_array()) {
        for (const auto& row : x0) cfg.run.x0.push_back(vector_from_json(row, "run.x0"));
      } else {
        cfg.run.x0.push_back(vector_from_json(x0, "run.x0"));
      }
    } else {
      cfg.run.x0.push_back(Eigen::VectorXd::Zero(n));
    }
    for (const auto& x : cfg.run.x0)
      if (x.size() != n) bad("run.x0 entries must have n = " + std::to_string(n) + " components");
    cfg.run.n_runs = get_or<int>(run, "n_runs", 1000);
    cfg.run.steps = get_or<int>(run, "steps", 15);
    cfg.run.seed = get_or<std::uint64_t>(run, "seed", 1);
    cfg.run.mode = mode_from_string(get_or<std::string>(run, "mode", "proposed"));
    if (cfg.run.n_runs < 0 || cfg.run.steps < 0) bad("run.n_runs and run.steps must be non-negative");

    const json rep = doc.value("report", json::object());
    cfg.report.window_row = get_or<int>(rep, "window_row", 0);
    cfg.report.window_first = get_or<int>(rep, "window_first", 1);
    cfg.report.window_last = get_or<int>(rep, "window_last", 6);
    cfg.report.grid_resolution = get_or<int>(rep, "grid_resolution", 200);
  } catch (const json::exception& e) {
    bad(std::string("type error: ") + e.what());
  }
  return cfg;
}

std::vector<std::string> current_environment() {
  std::vector<std::string> out;
  for (char** e = environ; e && *e; ++e) out.emplace_back(*e);
  return out;
}

void apply_env_overrides(json& doc, const std::vector<std::string>& environment) {
  const std::string prefix = kEnvPrefix;
  for (const auto& entry : environment) {
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string path = entry.substr(prefix.size(), eq - prefix.size());
    const std::string value = entry.substr(eq + 1);
    std::vector<std::string> keys;
    for (std::size_t pos = 0;;) {
      const auto next = path.find("__", pos);
      keys.push_back(path.substr(pos, next - pos));
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    json* node = &doc;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (!node->is_object()) bad("environment override " + entry.substr(0, eq) + " descends into a non-object");
      std::string key = lower(keys[i]);
      for (auto it = node->begin(); it != node->end(); ++it)
        if (lower_equal(it.key(), keys[i])) key = it.key();
      if (i + 1 == keys.size()) {
        json parsed = json::parse(value, nullptr, false);
        (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      } else {
        if (!node->contains(key)) (*node)[key] = json::object();
        node = &(*node)[key];
      }
    }
  }
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open config file '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) bad("config file '" + path + "' is not valid JSON");
  apply_env_overrides(doc, current_environment());
  return parse_config(doc);
}

std::string config_hash(const json& doc) {
  json sub = json::object();
  for (const char* key : {"system", "disturbance", "constraints", "mpc", "sampling", "synthesis"})
    if (doc.contains(key)) sub[key] = doc.at(key);
  const std::string text = sub.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace smpc
