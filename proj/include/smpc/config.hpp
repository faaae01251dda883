#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "smpc/mpc.hpp"

namespace smpc {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kEnvPrefix = "SMPC_";

struct RunConfig {
  std::vector<Eigen::VectorXd> x0;  ///< one or more initial states, used round-robin
  int n_runs = 1000;
  int steps = 15;
  std::uint64_t seed = 1;  ///< base seed of the closed-loop runs
  Mode mode = Mode::Proposed;
};

struct ReportConfig {
  int window_row = 0;
  int window_first = 1;
  int window_last = 6;
  int grid_resolution = 200;
};

/// Parsed and dimension-checked experiment description.
struct ScenarioConfig {
  LinearSystem sys;
  DisturbanceModel dist;
  ConstraintSpec spec;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  SynthesisOptions synthesis;
  RunConfig run;
  ReportConfig report;
  nlohmann::json raw;  ///< document after environment overrides
};

/// Parse a config document. Throws Error(Config) with the offending key.
ScenarioConfig parse_config(const nlohmann::json& doc);

/// Read, apply SMPC_ overrides from the environment, parse.
ScenarioConfig load_config(const std::string& path);

/// SMPC_A__B=value sets doc["a"]["b"] (keys matched case-insensitively, "__"
/// separates levels); the value is parsed as JSON and kept as a string otherwise.
void apply_env_overrides(nlohmann::json& doc, const std::vector<std::string>& environment);
std::vector<std::string> current_environment();

/// FNV-1a over the canonical dump of the blocks that feed synthesis.
std::string config_hash(const nlohmann::json& doc);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& key);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& key);

}  // namespace smpc
