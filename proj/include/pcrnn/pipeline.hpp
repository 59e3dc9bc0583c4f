#pragma once

// Stage orchestration: generate-paths -> build-db -> train -> evaluate -> simulate.
// Every stage writes its outputs plus a sibling `<stem>.manifest.json`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcrnn/database.hpp"
#include "pcrnn/io.hpp"
#include "pcrnn/macro.hpp"
#include "pcrnn/mesh.hpp"
#include "pcrnn/sampling.hpp"
#include "pcrnn/surrogate/training.hpp"

namespace pcrnn::pipeline {

using io::json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "pcrnn 0.1.0";

struct PipelineConfig {
  std::uint64_t seed = 0;
  sampling::PathConfig paths;  // seed is derived from `seed`
  fs::path rve_file;
  fs::path material_file;
  fs::path problem_file;  // optional; needed by simulate
  micro::DatabaseOptions database;
  surrogate::Architecture architecture;
  surrogate::TrainingConfig training;  // seed is derived from `seed`
  double test_fraction = 0.2;
  fs::path out_dir = "out";

  /// Effective configuration with derived seeds and resolved file paths.
  json to_json() const;
  /// sha256 of to_json().dump().
  std::string hash() const;
};

/// Relative file references resolve against `base_dir`. Throws ParameterError
/// when a referenced file does not exist.
PipelineConfig config_from_json(const json& j, const fs::path& base_dir);
PipelineConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed = std::nullopt,
                           std::optional<fs::path> out_dir = std::nullopt);

/// RVE mesh document: {"generator": "porous_cube", "n", "size", "pore_fraction"}.
mesh::RveMesh rve_from_json(const json& j);

struct Manifest {
  std::string stage;
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::map<std::string, std::string> inputs;   // file -> sha256
  std::map<std::string, std::string> outputs;  // file -> sha256
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, double> counts;
  std::map<std::string, double> timings;  // seconds
  json details = json::object();

  json to_json() const;
  static Manifest from_json(const json& j);
};

fs::path manifest_path(const fs::path& artifact);

struct StageOptions {
  bool force = false;
  std::optional<macro::Binding> mode;  // simulate only
  int workers = 1;
};

struct StageResult {
  int status = 0;
  bool skipped = false;  // outputs already present for this config
  fs::path manifest;
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"generate-paths", "build-db", "train", "evaluate", "simulate"};
  return names;
}

/// Runs one stage. Module errors propagate as exceptions; a missing
/// prerequisite throws ArtifactError naming the file.
StageResult run_stage(const std::string& stage, const PipelineConfig& config, const StageOptions& options = {});

// Artifact locations inside the output directory.
fs::path paths_file(const PipelineConfig& c);
fs::path database_file(const PipelineConfig& c);
fs::path model_file(const PipelineConfig& c);
fs::path history_file(const PipelineConfig& c);
fs::path evaluation_file(const PipelineConfig& c);
fs::path simulation_dir(const PipelineConfig& c);

/// Records as training sequences (every record row, including the zero state).
std::vector<surrogate::Sequence> to_sequences(const std::vector<micro::ResponseRecord>& records);

/// (train, test) positions of the held-out test split.
std::pair<std::vector<int>, std::vector<int>> test_split(int n, double fraction, std::uint64_t seed);

struct Violation {
  int line = 0;  // 1-based; 0 for whole-file problems
  std::string message;
};

struct ValidationReport {
  std::string path;
  std::string kind;
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  json to_json() const;
};

/// Schema check plus invariant scan. Kinds: paths, database, model,
/// manifest, evaluation, history, reaction, vtk.
ValidationReport validate_artifact(const fs::path& path);

}  // namespace pcrnn::pipeline
