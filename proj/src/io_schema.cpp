#include "sdec/io_schema.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <vector>

#include "sdec/errors.hpp"

namespace sdec::io {
namespace {

json vec(const VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

VectorXd to_vector(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("profile lacks array '") + key + "'");
  }
  const auto values = j.at(key).get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(values.data(),
                                    static_cast<Index>(values.size()));
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

RowRange range_from_json(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("partition lacks '") + key + "'");
  }
  const json& r = j.at(key);
  if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() ||
      !r[1].is_number_integer()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("partition '") + key + "' must be [start, end)");
  }
  return RowRange{r[0].get<Index>(), r[1].get<Index>()};
}

void check_schema_version(const json& j, const char* what) {
  if (j.contains("schema_version") &&
      j.at("schema_version").get<int>() != kSchemaVersion) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(what) + " schema_version " +
                    j.at("schema_version").dump() + " is not supported");
  }
}

json digests_to_json(const std::map<std::string, FileDigest>& m) {
  json out = json::object();
  for (const auto& [name, d] : m) {
    out[name] = {{"path", d.path}, {"sha256", d.sha256}};
  }
  return out;
}

std::map<std::string, FileDigest> digests_from_json(const json& j) {
  std::map<std::string, FileDigest> out;
  for (const auto& [name, d] : j.items()) {
    out[name] = FileDigest{d.at("path").get<std::string>(),
                           d.at("sha256").get<std::string>()};
  }
  return out;
}

}  // namespace

void PromptPartition::validate(bool allow_empty_scene) const {
  if (total_rows < 1) {
    throw Error(ErrorCode::kInvalidArgument, "total_rows must be >= 1");
  }
  auto inside = [&](const RowRange& r) {
    return r.begin >= 0 && r.end <= total_rows && r.begin <= r.end;
  };
  if (!inside(id_rows) || !inside(sc_rows)) {
    throw Error(ErrorCode::kInvalidArgument,
                "partition ranges must lie within [0, " +
                    std::to_string(total_rows) + ")");
  }
  if (id_rows.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "identity range is empty");
  }
  if (sc_rows.empty() && !allow_empty_scene) {
    throw Error(ErrorCode::kInvalidArgument, "scene range is empty");
  }
  if (id_rows.overlaps(sc_rows)) {
    throw Error(ErrorCode::kSliceOverlap, "identity and scene ranges overlap");
  }
}

PromptPartition partition_from_json(const json& j) {
  try {
    check_schema_version(j, "partition");
    PromptPartition p{range_from_json(j, "id_rows"), range_from_json(j, "sc_rows"),
                      j.at("total_rows").get<Index>()};
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("partition: ") + e.what());
  }
}

json to_json(const PromptPartition& p) {
  return {{"schema_version", kSchemaVersion},
          {"id_rows", {p.id_rows.begin, p.id_rows.end}},
          {"sc_rows", {p.sc_rows.begin, p.sc_rows.end}},
          {"total_rows", p.total_rows}};
}

OptimizerConfig config_from_json(const json& j) {
  static const std::set<std::string> known = {
      "schema_version", "beta", "m_switch", "total_iters", "omega", "step_size",
      "clamp_nonnegative", "invert_weighting", "degenerate_eps"};
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    }
  }
  try {
    check_schema_version(j, "config");
    OptimizerConfig c;
    c.beta = j.value("beta", c.beta);
    c.m_switch = j.value("m_switch", c.m_switch);
    c.total_iters = j.value("total_iters", c.total_iters);
    c.omega = j.value("omega", c.omega);
    c.step_size = j.value("step_size", c.step_size);
    c.clamp_nonnegative = j.value("clamp_nonnegative", c.clamp_nonnegative);
    c.invert_weighting = j.value("invert_weighting", c.invert_weighting);
    c.degenerate_eps = j.value("degenerate_eps", c.degenerate_eps);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
}

json to_json(const OptimizerConfig& c) {
  return {{"schema_version", kSchemaVersion},
          {"beta", c.beta},
          {"m_switch", c.m_switch},
          {"total_iters", c.total_iters},
          {"omega", c.omega},
          {"step_size", c.step_size},
          {"clamp_nonnegative", c.clamp_nonnegative},
          {"invert_weighting", c.invert_weighting},
          {"degenerate_eps", c.degenerate_eps}};
}

json to_json(const ExcursionProfile& p) {
  return {{"lambda_o", vec(p.lambda_o)},
          {"lambda_star", vec(p.lambda_star)},
          {"lambda_delta", vec(p.lambda_delta)},
          {"lambda_omega", vec(p.lambda_omega)},
          {"loss_trace", p.loss_trace},
          {"scene_distance", p.scene_distance},
          {"id_distance", p.id_distance},
          {"step_halvings", p.step_halvings}};
}

ExcursionProfile profile_from_json(const json& j) {
  try {
    ExcursionProfile p;
    p.lambda_o = to_vector(j, "lambda_o");
    p.lambda_star = to_vector(j, "lambda_star");
    p.lambda_delta = to_vector(j, "lambda_delta");
    p.lambda_omega = to_vector(j, "lambda_omega");
    p.loss_trace = j.value("loss_trace", std::vector<double>{});
    p.scene_distance = j.value("scene_distance", std::vector<double>{});
    p.id_distance = j.value("id_distance", std::vector<double>{});
    p.step_halvings = j.value("step_halvings", std::vector<int>{});
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("profile: ") + e.what());
  }
}

json to_json(const Quantiles& q) {
  return {{"count", q.count},
          {"min", number_or_null(q.min)},
          {"median", number_or_null(q.median)},
          {"max", number_or_null(q.max)}};
}

json to_json(const BoundBreakdown& b) {
  return {{"epsilon", b.epsilon},         {"r_cap_norm", b.r_cap_norm},
          {"r_perp_norm", b.r_perp_norm}, {"t_cap_fro", b.t_cap_fro},
          {"t_perp_fro", b.t_perp_fro},   {"sigma_cap", b.sigma_cap},
          {"sigma_perp", b.sigma_perp},   {"bound", b.bound},
          {"bound_sigma", b.bound_sigma}, {"measured", b.measured},
          {"t_cap_fro_alt", b.t_cap_fro_alt}, {"term_cap", b.term_cap},
          {"term_perp", b.term_perp}};
}

json to_json(const BoundSweepSummary& s) {
  return {{"trials", s.trials},
          {"instances", s.instances},
          {"violations", s.violations},
          {"chain_violations", s.chain_violations},
          {"tightness", to_json(s.tightness)},
          {"max_first_summand", s.max_first_summand},
          {"max_sigma_bound_gap", s.max_sigma_bound_gap},
          {"max_t_sigma_gap", s.max_t_sigma_gap},
          {"relative_tolerance", kBoundRelativeTolerance}};
}

json to_json(const ContextualizationSweepSummary& s) {
  json degenerate = {{"checked", s.degenerate_checked}};
  if (s.degenerate_checked) {
    degenerate["max_ratio"] = s.degenerate_max_ratio;
    degenerate["tolerance"] = kDegenerateTolerance;
    degenerate["passed"] = s.degenerate_max_ratio <= kDegenerateTolerance;
  }
  std::vector<json> per_query;
  for (double v : s.per_query_min_t_sc_norm) per_query.push_back(number_or_null(v));
  return {{"trials", s.trials},
          {"instances", s.instances},
          {"t_sc_norm", to_json(s.t_sc_norm)},
          {"nonzero_instances", s.nonzero_instances},
          {"max_decomposition_error", s.max_decomposition_error},
          {"max_alpha_sum_error", s.max_alpha_sum_error},
          {"min_alpha_entry", number_or_null(s.min_alpha_entry)},
          {"per_query_min_t_sc_norm", per_query},
          {"degenerate", degenerate}};
}

json to_json(const SubspaceSpec& s) {
  return {{"d", s.d}, {"k_id", s.k_id}, {"k_sc", s.k_sc}, {"k_cap", s.k_cap}};
}

json to_json(const RunReport& r) {
  json timings = json::object();
  for (const auto& [k, v] : r.timings_ms) timings[k] = v;
  return {{"schema_version", r.schema_version},
          {"tool_version", r.tool_version},
          {"command", r.command},
          {"seed", r.seed ? json(*r.seed) : json(nullptr)},
          {"config", r.config},
          {"timings_ms", timings},
          {"inputs", digests_to_json(r.inputs)},
          {"outputs", digests_to_json(r.outputs)},
          {"result", r.result}};
}

RunReport report_from_json(const json& j) {
  try {
    RunReport r;
    r.schema_version = j.at("schema_version").get<int>();
    r.tool_version = j.at("tool_version").get<std::string>();
    r.command = j.at("command").get<std::string>();
    if (!j.at("seed").is_null()) r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.at("config");
    for (const auto& [k, v] : j.at("timings_ms").items()) {
      r.timings_ms[k] = v.get<double>();
    }
    r.inputs = digests_from_json(j.at("inputs"));
    r.outputs = digests_from_json(j.at("outputs"));
    r.result = j.at("result");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("report: ") + e.what());
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoError, "SHA-256 initialisation failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);

  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[md[i] >> 4]);
    hex.push_back(kHex[md[i] & 0xF]);
  }
  return hex;
}

FileDigest digest_of(const std::filesystem::path& path) {
  return FileDigest{path.string(), sha256_file(path)};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

}  // namespace sdec::io
