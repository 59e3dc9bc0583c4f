#include <algorithm>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pcrnn/error.hpp"
#include "pcrnn/io.hpp"
#include "pcrnn/pipeline.hpp"
#include "pcrnn/util.hpp"
#include "support/fixtures.hpp"

using namespace pcrnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pcrnn_unit_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

/// Tiny pipeline config: small RVE, few paths, a handful of epochs.
fs::path write_tiny_config(const fs::path& dir, int n_paths) {
  write_file_atomic(dir / "rve.json", R"({"generator": "porous_cube", "n": 3, "size": 100.0, "pore_fraction": 0.0625})");
  write_file_atomic(dir / "material.json", io::to_json(constitutive::default_material()).dump());
  write_file_atomic(dir / "problem.json", R"({"mesh": {"fixture": "one_element"},
      "schedule": {"type": "ramp", "steps": 4, "max": 0.001}, "mode": "mono"})");
  io::json c = {{"seed", 5},
                {"out", "out"},
                {"paths", {{"n_load", 11}, {"n_c", 2}, {"n_paths", n_paths}}},
                {"rve", "rve.json"},
                {"material", "material.json"},
                {"problem", "problem.json"},
                {"database", {{"use_reduced", true}, {"clusters", 12}}},
                {"architecture", {{"layers", 1}, {"hidden", 4}, {"head_hidden", 4}}},
                {"training", {{"max_epochs", 3}, {"batch_size", 4}}},
                {"test_fraction", 0.25}};
  write_file_atomic(dir / "config.json", c.dump(2));
  return dir / "config.json";
}

}  // namespace

TEST_CASE("material, path config and record round trips") {
  const auto m = constitutive::default_material();
  const auto back = io::material_from_json(io::to_json(m));
  CHECK(back.hardening.breakpoints() == m.hardening.breakpoints());
  CHECK(back.char_length == m.char_length);

  io::json bad = io::to_json(m);
  bad["poisson_ratio"] = 0.7;
  CHECK_THROWS_AS(io::material_from_json(bad), ParameterError);

  const auto pc = io::path_config_from_json(io::json::parse(R"({"n_paths": 3, "engine": "lhs"})"));
  CHECK(pc.n_paths == 3);
  CHECK(pc.engine == sampling::Engine::lhs);
  CHECK(pc.zeta1 == 0.10);
  CHECK_THROWS_AS(io::path_config_from_json(io::json::parse(R"({"engine": "grid"})")), ParameterError);

  micro::ResponseRecord r;
  r.path_id = 7;
  r.strain = sampling::PathMatrix::Random(4, 6);
  r.stress = sampling::PathMatrix::Random(4, 6);
  r.damage = Eigen::VectorXd::LinSpaced(4, 0.0, 0.3);
  r.work = Eigen::VectorXd::LinSpaced(4, 0.0, 1.0);
  const auto r2 = io::record_from_json(io::json::parse(io::to_json(r).dump()));
  CHECK(r2.strain == r.strain);
  CHECK(r2.stress == r.stress);
  CHECK(r2.damage == r.damage);
}

TEST_CASE("model documents round trip bit for bit") {
  surrogate::Architecture a;
  a.layers = 2;
  a.hidden = 5;
  a.head_hidden = 3;
  a.look_back = 1;
  auto model = surrogate::init_model(a, 6, 3);
  fixtures::rough_normalization(model);
  const io::json doc = io::model_to_json(model, {{"note", "x"}});
  const auto back = io::model_from_json(io::json::parse(doc.dump()));
  const auto pa = model.parameters();
  const auto pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);
  CHECK(io::model_to_json(back, {{"note", "x"}}).dump() == doc.dump());

  io::json wrong = doc;
  wrong["version"] = 99;
  CHECK_THROWS_AS(io::model_from_json(wrong), ArtifactError);
}

TEST_CASE("JSON-lines parse errors name the line") {
  const std::string text = "{\"a\": 1}\n{\"a\": 2\n";
  try {
    io::parse_jsonl(text, "rows.jsonl");
    FAIL("expected a parse error");
  } catch (const ArtifactError& e) {
    CHECK(std::string(e.what()).find("rows.jsonl:2") != std::string::npos);
  }
  CHECK(io::parse_jsonl("{\"a\": 1}\n\n{\"b\": 2}\n").size() == 2);
}

TEST_CASE("problem documents build fixtures and schedules") {
  const auto p = io::problem_from_json(io::json::parse(R"({
    "mesh": {"fixture": "cube", "size": 2.0},
    "schedule": {"type": "cyclic", "steps": 6, "amplitude": 0.1},
    "mode": "benchmark", "nonlocal_length": 0.5})"));
  REQUIRE(p.schedule.size() == 6);
  CHECK(p.schedule[1] == doctest::Approx(0.1));
  CHECK(p.schedule[3] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.schedule[5] == doctest::Approx(-0.1));
  CHECK(p.binding.front() == macro::Binding::mechanistic);
  CHECK(p.nonlocal_length == 0.5);
  CHECK_THROWS_AS(io::problem_from_json(io::json::parse(R"({"mesh": {"fixture": "torus"}, "schedule": [0.1]})")),
                  ParameterError);
}

TEST_CASE("pipeline stages, idempotence and prerequisites") {
  const fs::path dir = scratch_dir("pipeline");
  const auto cfg = pipeline::load_config(write_tiny_config(dir, 10));

  CHECK_THROWS_WITH_AS(pipeline::run_stage("train", cfg), doctest::Contains("database.jsonl"), ArtifactError);

  const auto g = pipeline::run_stage("generate-paths", cfg);
  CHECK_FALSE(g.skipped);
  const std::string paths_text = read_file(pipeline::paths_file(cfg));
  CHECK(std::count(paths_text.begin(), paths_text.end(), '\n') == 10);
  CHECK(fs::exists(pipeline::manifest_path(pipeline::paths_file(cfg))));
  CHECK(pipeline::run_stage("generate-paths", cfg).skipped);

  pipeline::run_stage("build-db", cfg);
  pipeline::run_stage("train", cfg);
  pipeline::run_stage("evaluate", cfg);
  pipeline::run_stage("simulate", cfg);

  const fs::path sim = pipeline::simulation_dir(cfg);
  for (const fs::path& p : {pipeline::paths_file(cfg), pipeline::database_file(cfg), pipeline::model_file(cfg),
                            pipeline::history_file(cfg), pipeline::evaluation_file(cfg), sim / "reaction.csv",
                            sim / "step_0004.vtk", pipeline::manifest_path(pipeline::model_file(cfg))}) {
    const auto rep = pipeline::validate_artifact(p);
    INFO(p.string(), " ", rep.to_json().dump());
    CHECK(rep.ok());
  }
  const auto manifest = io::read_json(pipeline::manifest_path(pipeline::database_file(cfg)));
  CHECK(manifest.at("config_hash") == cfg.hash());
  CHECK(manifest.at("inputs").contains("paths.jsonl"));

  // A different seed with the same outputs must not be silently reused.
  const auto other = pipeline::load_config(dir / "config.json", 6);
  CHECK_THROWS_AS(pipeline::run_stage("generate-paths", other), ArtifactError);
  CHECK_FALSE(pipeline::run_stage("generate-paths", other, {.force = true}).skipped);
}

TEST_CASE("validation flags a decreasing damage record with its line") {
  const fs::path dir = scratch_dir("validate");
  micro::ResponseRecord r;
  r.strain = sampling::PathMatrix::Zero(4, 6);
  r.stress = sampling::PathMatrix::Zero(4, 6);
  r.damage = Eigen::VectorXd::Zero(4);
  r.work = Eigen::VectorXd::Zero(4);
  std::vector<io::json> rows;
  for (int i = 0; i < 3; ++i) {
    r.path_id = i;
    rows.push_back(io::to_json(r));
  }
  write_file_atomic(dir / "good.jsonl", io::to_jsonl(rows));
  CHECK(pipeline::validate_artifact(dir / "good.jsonl").ok());
  CHECK(pipeline::validate_artifact(dir / "good.jsonl").kind == "database");

  r.path_id = 1;
  r.damage << 0.0, 0.4, 0.3, 0.5;
  rows[1] = io::to_json(r);
  write_file_atomic(dir / "bad.jsonl", io::to_jsonl(rows));
  const auto rep = pipeline::validate_artifact(dir / "bad.jsonl");
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].line == 2);
  CHECK(rep.violations[0].message.find("decreases") != std::string::npos);

  std::string text = io::to_jsonl(rows);
  text = text.substr(0, text.size() - 40);
  write_file_atomic(dir / "cut.jsonl", text);
  const auto cut = pipeline::validate_artifact(dir / "cut.jsonl");
  REQUIRE_FALSE(cut.ok());
  const bool located = std::any_of(cut.violations.begin(), cut.violations.end(), [](const auto& v) {
    return v.line == 3 && v.message.find("parse error") != std::string::npos;
  });
  CHECK(located);

  write_file_atomic(dir / "model.json", "{\"format\": \"pcrnn-surrogate\", ");
  const auto trunc = pipeline::validate_artifact(dir / "model.json");
  REQUIRE_FALSE(trunc.ok());
  CHECK(trunc.violations[0].message.find("parse error") != std::string::npos);
}

TEST_CASE("validation flags out-of-bound paths") {
  const fs::path dir = scratch_dir("paths");
  const auto cfg = pipeline::load_config(write_tiny_config(dir, 3));
  pipeline::run_stage("generate-paths", cfg);
  auto rows = io::parse_jsonl(read_file(pipeline::paths_file(cfg)));
  rows[2]["steps"][5][0] = 0.5;
  write_file_atomic(pipeline::paths_file(cfg), io::to_jsonl(rows));
  const auto rep = pipeline::validate_artifact(pipeline::paths_file(cfg));
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].line == 3);
}
