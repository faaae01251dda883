#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "smpc/config.hpp"
#include "smpc/errors.hpp"
#include "smpc/sim.hpp"

namespace smpc {

/// Command-line overrides shared by all commands. Unset fields fall back to the config.
struct CliOptions {
  std::string config;
  std::string bundle;
  std::string out;
  std::optional<std::uint64_t> seed;  ///< base seed of the closed-loop runs
  int workers = 0;                    ///< 0: all cores
  std::optional<Mode> mode;
  std::optional<int> runs;
  std::optional<int> steps;
  std::optional<int> resolution;      ///< grid cross-check; 0 disables
};

/// Process exit status for an error: 2 config, 3 infeasible or unbounded synthesis, 4 otherwise.
int exit_code(ErrorKind kind);

/// Synthesize for the configured (or overridden) mode and write the bundle to opt.out.
SynthesisBundle cmd_synth(const CliOptions& opt, std::ostream& log);

/// Closed-loop runs of a saved bundle. Writes the trajectory CSV to opt.out and
/// the per-step violation table next to it (<stem>_summary.csv).
ViolationStats cmd_simulate(const CliOptions& opt, std::ostream& log);

/// First-step regions of all three modes. Writes CCW vertices to opt.out and
/// areas next to it (<stem>_areas.csv); a mode whose synthesis is infeasible
/// is reported with area 0 and the empty flag.
std::vector<RegionResult> cmd_region(const CliOptions& opt, std::ostream& log);

/// synth, simulate and region into the directory opt.out, plus report.json.
void cmd_report(const CliOptions& opt, std::ostream& log);

/// Dispatch by name; errors are printed to err with their module and mapped to an exit status.
int run_command(const std::string& name, const CliOptions& opt, std::ostream& out, std::ostream& err);

/// CSV writers (exposed for tests).
std::string trajectory_csv(const SynthesisBundle& bundle, const std::vector<RunRecord>& runs);
std::string violation_csv(const ViolationStats& stats);

}  // namespace smpc
