#include "smpc/bundle_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "smpc/config.hpp"
#include "smpc/errors.hpp"

namespace smpc {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::Config, "cli", "bundle: " + what); }

json matrix_field(const Eigen::MatrixXd& M) { return json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", matrix_to_json(M)}}; }

Eigen::MatrixXd matrix_field(const json& j, const std::string& key) {
  if (!j.contains(key)) bad("missing '" + key + "'");
  const json& f = j.at(key);
  const auto rows = f.at("rows").get<Eigen::Index>();
  const auto cols = f.at("cols").get<Eigen::Index>();
  Eigen::MatrixXd M(rows, cols);
  const json& data = f.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) bad("'" + key + "' row count mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(data[i].size()) != cols) bad("'" + key + "' column count mismatch");
    for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = number_from_json(data[i][c]);
  }
  return M;
}

Eigen::VectorXd vector_field(const json& j, const std::string& key) {
  if (!j.contains(key)) bad("missing '" + key + "'");
  const json& a = j.at(key);
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = number_from_json(a[i]);
  return v;
}

json log_to_json(const IterationLog& l) {
  return json{{"iterations", l.iterations}, {"converged", l.converged}, {"residual", number_to_json(l.residual)}};
}

IterationLog log_from_json(const json& j) {
  IterationLog l;
  l.iterations = j.at("iterations").get<int>();
  l.converged = j.at("converged").get<bool>();
  l.residual = number_from_json(j.at("residual"));
  return l;
}

json dist_to_json(const DisturbanceModel& d) {
  json j;
  if (d.kind() == DisturbanceKind::TruncatedGaussian) {
    j["kind"] = "truncated-gaussian";
    j["sigma"] = matrix_field(d.covariance());
    j["truncation"] = number_to_json(d.truncation());
    j["outer_facets"] = d.outer_facets();
  } else {
    j["kind"] = "finite-sample-bank";
    Eigen::MatrixXd S(static_cast<Eigen::Index>(d.bank().size()), d.dim());
    for (std::size_t i = 0; i < d.bank().size(); ++i) S.row(static_cast<Eigen::Index>(i)) = d.bank()[i].transpose();
    j["samples"] = matrix_field(S);
  }
  return j;
}

DisturbanceModel dist_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "truncated-gaussian")
    return DisturbanceModel::truncated_gaussian(matrix_field(j, "sigma"), number_from_json(j.at("truncation")),
                                                j.at("outer_facets").get<int>());
  if (kind == "finite-sample-bank") {
    const Eigen::MatrixXd S = matrix_field(j, "samples");
    std::vector<Eigen::VectorXd> bank;
    for (Eigen::Index i = 0; i < S.rows(); ++i) bank.push_back(S.row(i).transpose());
    return DisturbanceModel::sample_bank(std::move(bank));
  }
  bad("unknown disturbance kind '" + kind + "'");
}

}  // namespace

json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  bad("expected a number, got " + j.dump());
}

json polytope_to_json(const Polytope& P) {
  return json{{"dim", P.dim()}, {"empty", P.is_empty()}, {"F", matrix_field(P.A())}, {"f", vector_to_json(P.b())}};
}

Polytope polytope_from_json(const json& j) {
  const int dim = j.at("dim").get<int>();
  if (j.at("empty").get<bool>()) return Polytope::empty(dim);
  Eigen::MatrixXd F = matrix_field(j, "F");
  Eigen::VectorXd f = vector_field(j, "f");
  if (F.rows() == 0) return Polytope(dim);
  if (F.cols() != dim || f.size() != F.rows()) bad("polytope shape mismatch");
  return Polytope(std::move(F), std::move(f));
}

json bundle_to_json(const SynthesisBundle& b) {
  json j;
  j["schema_version"] = kBundleSchemaVersion;
  j["config_hash"] = b.config_hash;
  j["mode"] = to_string(b.mode);
  j["system"] = {{"A", matrix_field(b.sys.A)}, {"B", matrix_field(b.sys.B)}, {"Bw", matrix_field(b.sys.Bw)}};
  j["disturbance"] = dist_to_json(b.dist);
  j["constraints"] = {{"H", matrix_field(b.spec.H)},
                      {"h", vector_to_json(b.spec.h)},
                      {"eps", vector_to_json(b.spec.eps)},
                      {"G", matrix_field(b.spec.G)},
                      {"g", vector_to_json(b.spec.g)},
                      {"eps_u", b.spec.eps_u},
                      {"eps_T", b.spec.eps_T},
                      {"T", b.spec.T}};
  j["gains"] = {{"K", matrix_field(b.gains.K)},
                {"P", matrix_field(b.gains.P)},
                {"Q", matrix_field(b.gains.Q)},
                {"R", matrix_field(b.gains.R)},
                {"cost_constant", number_to_json(b.gains.cost_constant)},
                {"cost_constant_se", number_to_json(b.gains.cost_constant_se)}};
  j["tightening"] = {{"eta", matrix_field(b.tight.eta)},
                     {"mu", matrix_field(b.tight.mu)},
                     {"eta_first", vector_to_json(b.tight.eta_first)},
                     {"H_T", matrix_field(b.tight.H_T)},
                     {"h_T", vector_to_json(b.tight.h_T)},
                     {"eta_T", vector_to_json(b.tight.eta_T)},
                     {"terminal", polytope_to_json(b.tight.terminal)}};
  j["sets"] = {{"X_T", polytope_to_json(b.sets.X_T)},
               {"Z_T", polytope_to_json(b.sets.Z_T)},
               {"C_T", polytope_to_json(b.sets.C_T)},
               {"C_T_inf", polytope_to_json(b.sets.C_T_inf)},
               {"C_T_inf_x", polytope_to_json(b.sets.C_T_inf_x)},
               {"terminal_log", log_to_json(b.sets.terminal_log)},
               {"rci_log", log_to_json(b.sets.rci_log)}};
  j["tube"] = {{"enabled", b.tube}, {"S", polytope_to_json(b.S)}, {"terms", b.tube_terms}};
  j["region_bounded"] = b.region_bounded;
  return j;
}

SynthesisBundle bundle_from_json(const json& j) {
  try {
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kBundleSchemaVersion)
      bad("unsupported or missing schema_version");
    SynthesisBundle b;
    b.config_hash = j.at("config_hash").get<std::string>();
    b.mode = mode_from_string(j.at("mode").get<std::string>());
    const json& s = j.at("system");
    b.sys.A = matrix_field(s, "A");
    b.sys.B = matrix_field(s, "B");
    b.sys.Bw = matrix_field(s, "Bw");
    b.sys.validate();
    b.dist = dist_from_json(j.at("disturbance"));
    const json& c = j.at("constraints");
    b.spec.H = matrix_field(c, "H");
    b.spec.h = vector_field(c, "h");
    b.spec.eps = vector_field(c, "eps");
    b.spec.G = matrix_field(c, "G");
    b.spec.g = vector_field(c, "g");
    b.spec.eps_u = c.at("eps_u").get<double>();
    b.spec.eps_T = c.at("eps_T").get<double>();
    b.spec.T = c.at("T").get<int>();
    b.spec.validate(b.sys);
    const json& g = j.at("gains");
    b.gains.K = matrix_field(g, "K");
    b.gains.P = matrix_field(g, "P");
    b.gains.Q = matrix_field(g, "Q");
    b.gains.R = matrix_field(g, "R");
    b.gains.cost_constant = number_from_json(g.at("cost_constant"));
    b.gains.cost_constant_se = number_from_json(g.at("cost_constant_se"));
    const json& t = j.at("tightening");
    b.tight.eta = matrix_field(t, "eta");
    b.tight.mu = matrix_field(t, "mu");
    b.tight.eta_first = vector_field(t, "eta_first");
    b.tight.H_T = matrix_field(t, "H_T");
    b.tight.h_T = vector_field(t, "h_T");
    b.tight.eta_T = vector_field(t, "eta_T");
    b.tight.terminal = polytope_from_json(t.at("terminal"));
    const json& st = j.at("sets");
    b.sets.X_T = polytope_from_json(st.at("X_T"));
    b.sets.Z_T = polytope_from_json(st.at("Z_T"));
    b.sets.C_T = polytope_from_json(st.at("C_T"));
    b.sets.C_T_inf = polytope_from_json(st.at("C_T_inf"));
    b.sets.C_T_inf_x = polytope_from_json(st.at("C_T_inf_x"));
    b.sets.terminal_log = log_from_json(st.at("terminal_log"));
    b.sets.rci_log = log_from_json(st.at("rci_log"));
    const json& tube = j.at("tube");
    b.tube = tube.at("enabled").get<bool>();
    b.S = polytope_from_json(tube.at("S"));
    b.tube_terms = tube.at("terms").get<int>();
    b.region_bounded = j.at("region_bounded").get<bool>();
    return b;
  } catch (const json::exception& e) {
    bad(e.what());
  }
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Config, "cli", "cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorKind::Config, "cli", "write to '" + tmp.string() + "' failed");
    }
  }
  fs::rename(tmp, target);
}

void save_bundle(const SynthesisBundle& b, const std::string& path) {
  write_file_atomic(path, bundle_to_json(b).dump(1) + "\n");
}

SynthesisBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cli", "cannot open bundle '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) bad("'" + path + "' is not valid JSON");
  return bundle_from_json(j);
}

}  // namespace smpc
