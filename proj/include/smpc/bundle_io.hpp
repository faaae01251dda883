#pragma once

#include <json.hpp>

#include <string>

#include "smpc/mpc.hpp"

namespace smpc {

inline constexpr int kBundleSchemaVersion = 1;

/// Doubles are written with 17 significant digits (exact round trip);
/// non-finite values as the strings "inf", "-inf", "nan".
nlohmann::json number_to_json(double v);
double number_from_json(const nlohmann::json& j);

nlohmann::json polytope_to_json(const Polytope& P);
Polytope polytope_from_json(const nlohmann::json& j);

nlohmann::json bundle_to_json(const SynthesisBundle& b);
SynthesisBundle bundle_from_json(const nlohmann::json& j);

/// Writes to a sibling temporary file and renames, so a failed write leaves no artifact.
void write_file_atomic(const std::string& path, const std::string& contents);

void save_bundle(const SynthesisBundle& b, const std::string& path);
SynthesisBundle load_bundle(const std::string& path);

}  // namespace smpc
