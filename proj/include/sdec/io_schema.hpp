#pragma once

// JSON schemas shared by the command-line tool and external scripts:
// the prompt partition sidecar, the optimizer config and the run report.
// Every document carries "schema_version"; keys are emitted sorted.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "sdec/attention_sim.hpp"
#include "sdec/bounds.hpp"
#include "sdec/decontextualizer.hpp"
#include "sdec/intersection.hpp"

namespace sdec::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Token-index split of a prompt embedding into identity and scene rows.
struct PromptPartition {
  RowRange id_rows;
  RowRange sc_rows;
  Index total_rows = 0;

  /// Ranges must be disjoint, inside [0, total_rows) and non-empty; an empty
  /// scene range is tolerated only when allow_empty_scene is set. Throws
  /// SliceOverlap or InvalidArgument.
  void validate(bool allow_empty_scene = false) const;
};

PromptPartition partition_from_json(const json& j);
json to_json(const PromptPartition& p);

/// Missing keys keep their defaults; unknown keys are rejected.
OptimizerConfig config_from_json(const json& j);
json to_json(const OptimizerConfig& c);

json to_json(const ExcursionProfile& p);
ExcursionProfile profile_from_json(const json& j);

json to_json(const BoundBreakdown& b);
json to_json(const BoundSweepSummary& s);
json to_json(const ContextualizationSweepSummary& s);
json to_json(const SubspaceSpec& s);
json to_json(const Quantiles& q);

struct FileDigest {
  std::string path;
  std::string sha256;

  bool operator==(const FileDigest&) const = default;
};

struct RunReport {
  int schema_version = kSchemaVersion;
  std::string tool_version = kToolVersion;
  std::string command;
  std::optional<std::uint64_t> seed;
  json config = json::object();
  std::map<std::string, double> timings_ms;
  std::map<std::string, FileDigest> inputs;
  std::map<std::string, FileDigest> outputs;
  json result = json::object();

  bool operator==(const RunReport&) const = default;
};

json to_json(const RunReport& r);
RunReport report_from_json(const json& j);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

FileDigest digest_of(const std::filesystem::path& path);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace sdec::io
