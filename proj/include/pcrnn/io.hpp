#pragma once

// JSON and JSON-lines persistence for configs and artifacts.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcrnn/constitutive.hpp"
#include "pcrnn/database.hpp"
#include "pcrnn/macro.hpp"
#include "pcrnn/sampling.hpp"
#include "pcrnn/surrogate/training.hpp"

namespace pcrnn::io {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

json to_json(const constitutive::MaterialModel& m);
constitutive::MaterialModel material_from_json(const json& j);

json to_json(const sampling::PathConfig& c);
/// Missing keys keep their defaults.
sampling::PathConfig path_config_from_json(const json& j);

json to_json(const sampling::StrainPath& p);
sampling::StrainPath path_from_json(const json& j);

json to_json(const micro::ResponseRecord& r);
micro::ResponseRecord record_from_json(const json& j);

json to_json(const surrogate::Architecture& a);
surrogate::Architecture architecture_from_json(const json& j);

json to_json(const surrogate::TrainingConfig& c);
surrogate::TrainingConfig training_config_from_json(const json& j);

/// Versioned model document: architecture, normalization, every parameter
/// matrix as a row-major array, plus an arbitrary config echo.
json model_to_json(const surrogate::SurrogateModel& m, const json& config_echo = json::object());
surrogate::SurrogateModel model_from_json(const json& j);

/// Macro problem document. Mesh is either {"fixture": name, ...} or explicit
/// {"nodes": [[x,y,z]...], "elements": [[a,b,c,d]...]}.
macro::MacroProblem problem_from_json(const json& j);

/// One compact JSON document per line.
std::string to_jsonl(const std::vector<json>& rows);

/// Parses every line; throws ArtifactError naming the line on malformed input.
std::vector<json> parse_jsonl(const std::string& text, const std::string& source = "input");

json read_json(const std::filesystem::path& path);

sampling::PathMatrix matrix_from_json(const json& rows);
json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace pcrnn::io
