#include "pcrnn/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pcrnn/error.hpp"
#include "pcrnn/util.hpp"

namespace pcrnn::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path resolve(const json& j, const char* key, const fs::path& base, bool required) {
  if (!j.contains(key)) {
    if (required) throw ParameterError(std::string("config: missing '") + key + "'");
    return {};
  }
  fs::path p = j.at(key).get<std::string>();
  if (p.is_relative()) p = base / p;
  p = p.lexically_normal();
  if (!fs::exists(p)) throw ParameterError(std::string("config: ") + key + " file not found: " + p.string());
  return p;
}

void require(const fs::path& p, const std::string& stage) {
  if (!fs::exists(p))
    throw ArtifactError(stage + ": missing prerequisite artifact " + p.string() +
                        " (run the preceding stage first)");
}

std::string file_key(const fs::path& p) { return p.filename().string(); }

std::vector<sampling::StrainPath> load_paths(const fs::path& p) {
  std::vector<sampling::StrainPath> paths;
  for (const auto& row : io::parse_jsonl(read_file(p), p.string())) paths.push_back(io::path_from_json(row));
  return paths;
}

std::vector<micro::ResponseRecord> load_records(const fs::path& p) {
  std::vector<micro::ResponseRecord> records;
  for (const auto& row : io::parse_jsonl(read_file(p), p.string())) records.push_back(io::record_from_json(row));
  return records;
}

/// True when every output and the manifest exist and the manifest was made
/// with the same configuration.
bool up_to_date(const std::vector<fs::path>& outputs, const fs::path& manifest, const std::string& hash) {
  for (const auto& o : outputs)
    if (!fs::exists(o)) return false;
  if (!fs::exists(manifest)) return false;
  const Manifest m = Manifest::from_json(io::read_json(manifest));
  if (m.config_hash != hash)
    throw ArtifactError("outputs in " + manifest.parent_path().string() +
                        " were produced by a different configuration; rerun with --force");
  return true;
}

void write_manifest(const fs::path& artifact, Manifest m, const std::vector<fs::path>& outputs) {
  for (const auto& o : outputs) m.outputs[file_key(o)] = sha256_file(o);
  write_file_atomic(manifest_path(artifact), m.to_json().dump(2) + "\n");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---- configuration --------------------------------------------------------

json PipelineConfig::to_json() const {
  json db = {{"use_reduced", database.use_reduced},
             {"clusters", database.clusters},
             {"cluster_seed", database.cluster_seed},
             {"tolerance", database.solver.tolerance},
             {"max_iterations", database.solver.max_iterations},
             {"max_failure_rate", database.max_failure_rate}};
  return {{"seed", seed},
          {"paths", io::to_json(paths)},
          {"rve", rve_file.string()},
          {"material", material_file.string()},
          {"problem", problem_file.string()},
          {"database", db},
          {"architecture", io::to_json(architecture)},
          {"training", io::to_json(training)},
          {"test_fraction", test_fraction}};
}

std::string PipelineConfig::hash() const { return sha256_hex(to_json().dump()); }

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    c.paths = io::path_config_from_json(j.value("paths", json::object()));
    c.rve_file = resolve(j, "rve", base_dir, true);
    c.material_file = resolve(j, "material", base_dir, true);
    c.problem_file = resolve(j, "problem", base_dir, false);
    const json db = j.value("database", json::object());
    c.database.use_reduced = db.value("use_reduced", c.database.use_reduced);
    c.database.clusters = db.value("clusters", c.database.clusters);
    c.database.solver.tolerance = db.value("tolerance", c.database.solver.tolerance);
    c.database.solver.max_iterations = db.value("max_iterations", c.database.solver.max_iterations);
    c.database.max_failure_rate = db.value("max_failure_rate", c.database.max_failure_rate);
    c.architecture = io::architecture_from_json(j.value("architecture", json::object()));
    c.training = io::training_config_from_json(j.value("training", json::object()));
    c.test_fraction = j.value("test_fraction", c.test_fraction);
    if (j.contains("out")) {
      fs::path out = j.at("out").get<std::string>();
      c.out_dir = out.is_relative() ? (base_dir / out).lexically_normal() : out;
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) throw ParameterError("config: test_fraction must lie in (0, 1)");
  c.paths.seed = derive_seed(c.seed, "paths");
  c.database.cluster_seed = derive_seed(c.seed, "clusters");
  c.training.seed = derive_seed(c.seed, "train");
  c.paths.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed, std::optional<fs::path> out_dir) {
  json j = io::read_json(path);
  if (seed) j["seed"] = *seed;
  PipelineConfig c = config_from_json(j, path.parent_path());
  if (out_dir) c.out_dir = *out_dir;
  return c;
}

mesh::RveMesh rve_from_json(const json& j) {
  try {
    const auto gen = j.value("generator", std::string("porous_cube"));
    if (gen != "porous_cube") throw ParameterError("unknown RVE generator '" + gen + "'");
    return mesh::make_rve(j.at("n").get<int>(), j.value("size", 100.0), j.value("pore_fraction", 0.0625));
  } catch (const json::exception& e) {
    throw ParameterError(std::string("rve: ") + e.what());
  }
}

// ---- manifests ------------------------------------------------------------

json Manifest::to_json() const {
  return {{"manifest", 1},  {"stage", stage},   {"tool_version", tool_version},
          {"config_hash", config_hash}, {"inputs", inputs}, {"outputs", outputs},
          {"seeds", seeds}, {"counts", counts}, {"timings", timings},
          {"details", details}};
}

Manifest Manifest::from_json(const json& j) {
  Manifest m;
  try {
    m.stage = j.at("stage").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.counts = j.at("counts").get<std::map<std::string, double>>();
    m.timings = j.at("timings").get<std::map<std::string, double>>();
    m.details = j.value("details", json::object());
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("manifest: ") + e.what());
  }
  return m;
}

fs::path manifest_path(const fs::path& artifact) {
  fs::path p = artifact;
  return p.replace_extension(".manifest.json");
}

fs::path paths_file(const PipelineConfig& c) { return c.out_dir / "paths.jsonl"; }
fs::path database_file(const PipelineConfig& c) { return c.out_dir / "database.jsonl"; }
fs::path model_file(const PipelineConfig& c) { return c.out_dir / "model.json"; }
fs::path history_file(const PipelineConfig& c) { return c.out_dir / "history.csv"; }
fs::path evaluation_file(const PipelineConfig& c) { return c.out_dir / "evaluation.json"; }
fs::path simulation_dir(const PipelineConfig& c) { return c.out_dir / "simulate"; }

std::vector<surrogate::Sequence> to_sequences(const std::vector<micro::ResponseRecord>& records) {
  std::vector<surrogate::Sequence> seqs;
  seqs.reserve(records.size());
  for (const auto& r : records) seqs.push_back({r.strain, r.stress, r.damage});
  return seqs;
}

std::pair<std::vector<int>, std::vector<int>> test_split(int n, double fraction, std::uint64_t seed) {
  return surrogate::split_indices(n, fraction, derive_seed(seed, "test-split"));
}

// ---- stages ---------------------------------------------------------------

namespace {

StageResult generate_stage(const PipelineConfig& c, const StageOptions& o) {
  const fs::path out = paths_file(c);
  if (!o.force && up_to_date({out}, manifest_path(out), c.hash())) return {0, true, manifest_path(out)};
  const auto t0 = Clock::now();
  const auto paths = sampling::generate_paths(c.paths, o.workers);
  std::vector<json> rows;
  rows.reserve(paths.size());
  double attempts = 0.0;
  for (const auto& p : paths) {
    rows.push_back(io::to_json(p));
    attempts += p.attempts;
  }
  write_file_atomic(out, io::to_jsonl(rows));
  Manifest m;
  m.stage = "generate-paths";
  m.config_hash = c.hash();
  m.seeds = {{"global", c.seed}, {"paths", c.paths.seed}};
  m.counts = {{"paths", double(paths.size())}, {"attempts", attempts}, {"n_load", double(c.paths.n_load)}};
  m.timings = {{"generate", seconds_since(t0)}};
  m.details = {{"path_config", io::to_json(c.paths)}};
  write_manifest(out, std::move(m), {out});
  return {0, false, manifest_path(out)};
}

StageResult build_db_stage(const PipelineConfig& c, const StageOptions& o) {
  const fs::path in = paths_file(c);
  const fs::path out = database_file(c);
  require(in, "build-db");
  if (!o.force && up_to_date({out}, manifest_path(out), c.hash())) return {0, true, manifest_path(out)};
  const auto t0 = Clock::now();
  const auto paths = load_paths(in);
  const mesh::RveMesh rve = rve_from_json(io::read_json(c.rve_file));
  const auto material = io::material_from_json(io::read_json(c.material_file));
  micro::DatabaseOptions opts = c.database;
  opts.workers = o.workers;
  const micro::Database db = micro::build_database(paths, rve, material, opts);
  std::vector<json> rows;
  rows.reserve(db.records.size());
  for (const auto& r : db.records) rows.push_back(io::to_json(r));
  write_file_atomic(out, io::to_jsonl(rows));

  Manifest m;
  m.stage = "build-db";
  m.config_hash = c.hash();
  m.inputs = {{file_key(in), sha256_file(in)},
              {file_key(c.rve_file), sha256_file(c.rve_file)},
              {file_key(c.material_file), sha256_file(c.material_file)}};
  m.seeds = {{"global", c.seed}, {"clusters", c.database.cluster_seed}};
  double corrections = 0.0, refined = 0.0;
  for (const auto& r : db.records) {
    corrections += r.damage_corrections;
    refined += r.refined_steps;
  }
  m.counts = {{"paths", double(paths.size())},
              {"records", double(db.records.size())},
              {"failures", double(db.failures.size())},
              {"damage_corrections", corrections},
              {"refined_steps", refined},
              {"rve_elements", double(rve.mesh.num_elements())}};
  m.timings = {{"build", seconds_since(t0)}};
  json failures = json::array();
  for (const auto& f : db.failures) failures.push_back({{"path_id", f.path_id}, {"message", f.message}});
  m.details = {{"failures", failures}, {"reduced", c.database.use_reduced}, {"clusters", c.database.clusters}};
  write_manifest(out, std::move(m), {out});
  return {0, false, manifest_path(out)};
}

StageResult train_stage(const PipelineConfig& c, const StageOptions& o) {
  const fs::path in = database_file(c);
  const fs::path out = model_file(c);
  const fs::path hist = history_file(c);
  require(in, "train");
  if (!o.force && up_to_date({out, hist}, manifest_path(out), c.hash())) return {0, true, manifest_path(out)};
  const auto t0 = Clock::now();
  const auto records = load_records(in);
  if (records.size() < 3) throw ArtifactError("train: database " + in.string() + " holds fewer than 3 records");
  const auto seqs = to_sequences(records);
  const auto [fit_idx, test_idx] = test_split(static_cast<int>(seqs.size()), c.test_fraction, c.seed);
  std::vector<surrogate::Sequence> fit;
  for (int i : fit_idx) fit.push_back(seqs[static_cast<std::size_t>(i)]);

  const int n_load = static_cast<int>(records.front().strain.rows());
  const auto init = surrogate::init_model(c.architecture, n_load, derive_seed(c.seed, "init"));
  const surrogate::TrainingResult result = surrogate::train(init, fit, c.training);

  write_file_atomic(out, io::model_to_json(result.model, c.to_json()).dump() + "\n");
  std::string csv = "epoch,train_loss,val_loss,penalty,lr\n";
  for (const auto& e : result.history)
    csv += std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," + fmt(e.val_loss) + "," + fmt(e.penalty) + "," +
           fmt(e.lr) + "\n";
  write_file_atomic(hist, csv);

  Manifest m;
  m.stage = "train";
  m.config_hash = c.hash();
  m.inputs = {{file_key(in), sha256_file(in)}};
  m.seeds = {{"global", c.seed},
             {"init", derive_seed(c.seed, "init")},
             {"train", c.training.seed},
             {"test_split", derive_seed(c.seed, "test-split")}};
  m.counts = {{"records", double(records.size())},
              {"fit", double(fit_idx.size())},
              {"test", double(test_idx.size())},
              {"epochs", double(result.history.size())},
              {"best_epoch", double(result.best_epoch)}};
  m.timings = {{"train", seconds_since(t0)}};
  json test_ids = json::array();
  for (int i : test_idx) test_ids.push_back(records[static_cast<std::size_t>(i)].path_id);
  m.details = {{"test_path_ids", test_ids}};
  write_manifest(out, std::move(m), {out, hist});
  return {0, false, manifest_path(out)};
}

StageResult evaluate_stage(const PipelineConfig& c, const StageOptions& o) {
  const fs::path db = database_file(c);
  const fs::path model = model_file(c);
  const fs::path out = evaluation_file(c);
  require(db, "evaluate");
  require(model, "evaluate");
  if (!o.force && up_to_date({out}, manifest_path(out), c.hash())) return {0, true, manifest_path(out)};
  const auto t0 = Clock::now();
  const auto records = load_records(db);
  const auto seqs = to_sequences(records);
  const auto test_idx = test_split(static_cast<int>(seqs.size()), c.test_fraction, c.seed).second;
  std::vector<surrogate::Sequence> test;
  for (int i : test_idx) test.push_back(seqs[static_cast<std::size_t>(i)]);
  const auto m_model = io::model_from_json(io::read_json(model));
  const surrogate::MseReport r = surrogate::evaluate_mse(m_model, test);
  const json doc = {{"n_test", test.size()},      {"mse", r.mse},           {"mse_s", r.mse_s},
                    {"mse_d", r.mse_d},           {"mse_phys", r.mse_phys}, {"mse_s_phys", r.mse_s_phys},
                    {"mse_d_phys", r.mse_d_phys}};
  write_file_atomic(out, doc.dump(2) + "\n");
  Manifest m;
  m.stage = "evaluate";
  m.config_hash = c.hash();
  m.inputs = {{file_key(db), sha256_file(db)}, {file_key(model), sha256_file(model)}};
  m.seeds = {{"global", c.seed}, {"test_split", derive_seed(c.seed, "test-split")}};
  m.counts = {{"test", double(test.size())}};
  m.timings = {{"evaluate", seconds_since(t0)}};
  write_manifest(out, std::move(m), {out});
  return {0, false, manifest_path(out)};
}

StageResult simulate_stage(const PipelineConfig& c, const StageOptions& o) {
  if (c.problem_file.empty()) throw ArtifactError("simulate: the configuration names no problem file");
  require(c.problem_file, "simulate");
  macro::MacroProblem problem = io::problem_from_json(io::read_json(c.problem_file));
  if (o.mode) problem.set_binding(*o.mode);

  const fs::path dir = simulation_dir(c);
  const fs::path csv = dir / "reaction.csv";
  // The mode override changes the outputs, so it is part of the identity.
  json echo = c.to_json();
  echo["mode"] = o.mode ? macro::binding_name(*o.mode) : "problem";
  const std::string hash = sha256_hex(echo.dump());
  if (!o.force && up_to_date({csv}, manifest_path(csv), hash)) return {0, true, manifest_path(csv)};

  const auto t0 = Clock::now();
  macro::Models models;
  models.material = io::material_from_json(io::read_json(c.material_file));
  Manifest m;
  m.inputs = {{file_key(c.problem_file), sha256_file(c.problem_file)},
              {file_key(c.material_file), sha256_file(c.material_file)}};
  bool uses_surrogate = false, uses_rve = false;
  for (auto b : problem.binding) {
    uses_surrogate |= b == macro::Binding::surrogate;
    uses_rve |= b == macro::Binding::mechanistic;
  }
  std::optional<surrogate::SurrogateModel> model;
  std::optional<micro::RveSolver> rve_solver;
  if (uses_surrogate) {
    require(model_file(c), "simulate");
    model = io::model_from_json(io::read_json(model_file(c)));
    models.surrogate = &*model;
    m.inputs[file_key(model_file(c))] = sha256_file(model_file(c));
  }
  if (uses_rve) {
    micro::SolverOptions so;
    so.tolerance = 1e-9;
    so.max_iterations = 25;
    const mesh::RveMesh rve = rve_from_json(io::read_json(c.rve_file));
    rve_solver = micro::RveSolver::full(rve, models.material, so);
    models.rve = &*rve_solver;
    m.inputs[file_key(c.rve_file)] = sha256_file(c.rve_file);
  }
  macro::SolveOptions so;
  so.workers = o.workers;
  const macro::MacroResult result = macro::newton_solve(problem, models, so);

  fs::create_directories(dir);
  std::vector<fs::path> outputs{csv};
  write_file_atomic(csv, macro::reaction_csv(result));
  for (const auto& f : result.frames) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%04d.vtk", f.step);
    const fs::path p = dir / name;
    write_file_atomic(p, macro::vtk_frame(problem.mesh, f));
    outputs.push_back(p);
  }
  m.stage = "simulate";
  m.config_hash = hash;
  m.seeds = {{"global", c.seed}};
  int iterations = 0, bisected = 0;
  for (const auto& s : result.steps) {
    iterations += s.iterations;
    bisected += s.bisected ? 1 : 0;
  }
  m.counts = {{"steps", double(result.steps.size())},
              {"elements", double(problem.mesh.num_elements())},
              {"newton_iterations", double(iterations)},
              {"bisected_steps", double(bisected)}};
  m.timings = {{"simulate", seconds_since(t0)}};
  m.details = {{"mode", echo["mode"]}};
  write_manifest(csv, std::move(m), outputs);
  return {0, false, manifest_path(csv)};
}

}  // namespace

StageResult run_stage(const std::string& stage, const PipelineConfig& config, const StageOptions& options) {
  fs::create_directories(config.out_dir);
  if (stage == "generate-paths") return generate_stage(config, options);
  if (stage == "build-db") return build_db_stage(config, options);
  if (stage == "train") return train_stage(config, options);
  if (stage == "evaluate") return evaluate_stage(config, options);
  if (stage == "simulate") return simulate_stage(config, options);
  throw ParameterError("unknown stage '" + stage + "'");
}

// ---- validation -----------------------------------------------------------

json ValidationReport::to_json() const {
  json v = json::array();
  for (const auto& x : violations) v.push_back({{"line", x.line}, {"message", x.message}});
  return {{"path", path}, {"kind", kind}, {"ok", ok()}, {"violations", v}};
}

namespace {

bool all_finite(const json& j) {
  if (j.is_number()) return std::isfinite(j.get<double>());
  if (j.is_array() || j.is_object()) {
    for (const auto& x : j)
      if (!all_finite(x)) return false;
    return true;
  }
  return !j.is_null();
}

void scan_paths(const std::vector<std::string>& lines, const fs::path& path, ValidationReport& rep) {
  std::optional<double> z1, z2;
  if (fs::exists(manifest_path(path))) {
    try {
      const json pc = io::read_json(manifest_path(path)).at("details").at("path_config");
      z1 = pc.at("zeta1").get<double>();
      z2 = pc.at("zeta2").get<double>();
    } catch (const std::exception&) {
      rep.violations.push_back({0, "manifest lacks the path bounds"});
    }
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line = static_cast<int>(i) + 1;
    try {
      const auto p = io::path_from_json(json::parse(lines[i]));
      if (!p.steps.allFinite()) rep.violations.push_back({line, "non-finite strain"});
      else if (p.steps.rows() > 0 && p.steps.row(0).norm() != 0.0)
        rep.violations.push_back({line, "first step is not the zero strain"});
      else if (z1 && !sampling::within_bounds(p.steps, *z1, *z2))
        rep.violations.push_back({line, "strain outside the sampling bounds"});
    } catch (const std::exception& e) {
      rep.violations.push_back({line, e.what()});
    }
  }
}

void scan_records(const std::vector<std::string>& lines, ValidationReport& rep) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line = static_cast<int>(i) + 1;
    try {
      micro::check_record(io::record_from_json(json::parse(lines[i])));
    } catch (const std::exception& e) {
      rep.violations.push_back({line, e.what()});
    }
  }
}

void scan_csv(const std::string& text, const std::string& header, ValidationReport& rep) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) {
      if (line != header) rep.violations.push_back({1, "header is '" + line + "', expected '" + header + "'"});
      columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
      continue;
    }
    std::istringstream cells(line);
    std::string cell;
    std::size_t k = 0;
    bool bad = false;
    while (std::getline(cells, cell, ',')) {
      ++k;
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size() || !std::isfinite(v)) bad = true;
      } catch (const std::exception&) {
        bad = true;
      }
    }
    if (k != columns) rep.violations.push_back({n, "expected " + std::to_string(columns) + " columns"});
    else if (bad) rep.violations.push_back({n, "non-numeric or non-finite cell"});
  }
  if (n == 0) rep.violations.push_back({0, "empty file"});
}

}  // namespace

ValidationReport validate_artifact(const fs::path& path) {
  ValidationReport rep;
  rep.path = path.string();
  if (!fs::exists(path)) throw ArtifactError("no such artifact: " + path.string());
  const std::string text = read_file(path);
  const std::string name = path.filename().string();
  const std::string ext = path.extension().string();

  if (ext == ".jsonl") {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    // Kind from the first parsable line.
    rep.kind = "jsonl";
    for (const auto& l : lines) {
      try {
        const json j = json::parse(l);
        rep.kind = j.contains("stress") ? "database" : j.contains("steps") ? "paths" : "jsonl";
        break;
      } catch (const json::parse_error&) {
      }
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (json::accept(lines[i])) continue;
      try {
        const json discard = json::parse(lines[i]);
      } catch (const json::parse_error& e) {
        rep.violations.push_back({static_cast<int>(i) + 1, "parse error at byte " + std::to_string(e.byte) + ": " +
                                                              e.what()});
        lines[i].clear();
      }
    }
    std::vector<std::string> parsed;
    std::vector<int> numbers;
    for (std::size_t i = 0; i < lines.size(); ++i)
      if (!lines[i].empty()) {
        parsed.push_back(lines[i]);
        numbers.push_back(static_cast<int>(i) + 1);
      }
    ValidationReport sub;
    if (rep.kind == "database") scan_records(parsed, sub);
    else if (rep.kind == "paths") scan_paths(parsed, path, sub);
    else rep.violations.push_back({0, "unrecognized JSON-lines content"});
    for (auto v : sub.violations) {
      if (v.line > 0) v.line = numbers[static_cast<std::size_t>(v.line - 1)];
      rep.violations.push_back(v);
    }
    if (lines.empty()) rep.violations.push_back({0, "empty file"});
    return rep;
  }

  if (ext == ".json") {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      rep.kind = "json";
      // Byte offset to a line number.
      const std::size_t at = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
      const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(at), '\n'));
      rep.violations.push_back({line, std::string("parse error: ") + e.what()});
      return rep;
    }
    if (j.contains("manifest")) {
      rep.kind = "manifest";
      try {
        (void)Manifest::from_json(j);
      } catch (const std::exception& e) {
        rep.violations.push_back({0, e.what()});
      }
      return rep;
    }
    if (j.value("format", "") == "pcrnn-surrogate") {
      rep.kind = "model";
      if (!all_finite(j.at("parameters")) || !all_finite(j.at("normalization")))
        rep.violations.push_back({0, "non-finite parameter or normalization value"});
      try {
        (void)io::model_from_json(j);
      } catch (const std::exception& e) {
        rep.violations.push_back({0, e.what()});
      }
      return rep;
    }
    if (j.contains("mse_d")) {
      rep.kind = "evaluation";
      for (const char* k : {"mse", "mse_s", "mse_d"})
        if (!j.contains(k) || !j.at(k).is_number() || !(j.at(k).get<double>() >= 0.0))
          rep.violations.push_back({0, std::string("missing or invalid ") + k});
      return rep;
    }
    rep.kind = "json";
    rep.violations.push_back({0, "unrecognized JSON document"});
    return rep;
  }

  if (ext == ".csv") {
    if (name.rfind("history", 0) == 0) {
      rep.kind = "history";
      scan_csv(text, "epoch,train_loss,val_loss,penalty,lr", rep);
    } else {
      rep.kind = "reaction";
      scan_csv(text, "step,displacement,reaction,iterations,residual", rep);
    }
    return rep;
  }

  if (ext == ".vtk") {
    rep.kind = "vtk";
    if (text.rfind("# vtk DataFile Version", 0) != 0) rep.violations.push_back({1, "missing VTK header"});
    for (const char* key : {"DATASET UNSTRUCTURED_GRID", "POINTS", "CELLS", "CELL_TYPES"})
      if (text.find(key) == std::string::npos) rep.violations.push_back({0, std::string("missing section ") + key});
    if (text.find("nan") != std::string::npos || text.find("inf") != std::string::npos)
      rep.violations.push_back({0, "non-finite field value"});
    return rep;
  }

  rep.kind = "unknown";
  rep.violations.push_back({0, "unrecognized artifact type '" + ext + "'"});
  return rep;
}

}  // namespace pcrnn::pipeline
