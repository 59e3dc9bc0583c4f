#include "pcrnn/io.hpp"

#include <sstream>

#include "pcrnn/error.hpp"
#include "pcrnn/util.hpp"

namespace pcrnn::io {

namespace {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

sampling::PathMatrix matrix_from_json(const json& rows) {
  if (!rows.is_array()) throw ArtifactError("expected an array of 6-component rows");
  sampling::PathMatrix m(static_cast<Eigen::Index>(rows.size()), 6);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const json& row = rows[r];
    if (!row.is_array() || row.size() != 6) throw ArtifactError("row " + std::to_string(r) + " does not have 6 entries");
    for (std::size_t c = 0; c < 6; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
  }
  return m;
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json dense_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd dense_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ArtifactError("matrix data size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace

json to_json(const constitutive::MaterialModel& m) {
  json bp = json::array();
  for (const auto& [e, s] : m.hardening.breakpoints()) bp.push_back({e, s});
  return {{"elastic_modulus_mpa", m.elastic_modulus},
          {"poisson_ratio", m.poisson_ratio},
          {"hardening_breakpoints", bp},
          {"damage_init_strain", m.damage_init_strain},
          {"alpha", m.alpha},
          {"fracture_energy", m.fracture_energy},
          {"fracture_strain", m.fracture_strain},
          {"char_length", m.char_length}};
}

constitutive::MaterialModel material_from_json(const json& j) {
  constitutive::MaterialModel m;
  try {
    m.elastic_modulus = j.at("elastic_modulus_mpa").get<double>();
    m.poisson_ratio = j.at("poisson_ratio").get<double>();
    std::vector<std::pair<double, double>> bp;
    for (const auto& p : j.at("hardening_breakpoints")) bp.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    m.hardening = constitutive::HardeningCurve(std::move(bp));
    m.damage_init_strain = j.at("damage_init_strain").get<double>();
    m.alpha = j.at("alpha").get<double>();
    m.fracture_energy = j.at("fracture_energy").get<double>();
    m.fracture_strain = j.at("fracture_strain").get<double>();
    m.char_length = j.at("char_length").get<double>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("material: ") + e.what());
  }
  m.validate();
  return m;
}

json to_json(const sampling::PathConfig& c) {
  return {{"n_load", c.n_load},
          {"n_c", c.n_c},
          {"zeta1", c.zeta1},
          {"zeta2", c.zeta2},
          {"gp_variance", c.variance()},
          {"gp_roughness", c.roughness()},
          {"n_paths", c.n_paths},
          {"seed", c.seed},
          {"engine", c.engine == sampling::Engine::sobol ? "sobol" : "lhs"}};
}

sampling::PathConfig path_config_from_json(const json& j) {
  sampling::PathConfig c;
  try {
    read_opt(j, "n_load", c.n_load);
    read_opt(j, "n_c", c.n_c);
    read_opt(j, "zeta1", c.zeta1);
    read_opt(j, "zeta2", c.zeta2);
    read_opt(j, "gp_variance", c.gp_variance);
    read_opt(j, "gp_roughness", c.gp_roughness);
    read_opt(j, "n_paths", c.n_paths);
    read_opt(j, "seed", c.seed);
    if (j.contains("engine")) {
      const auto e = j.at("engine").get<std::string>();
      if (e == "sobol") c.engine = sampling::Engine::sobol;
      else if (e == "lhs") c.engine = sampling::Engine::lhs;
      else throw ParameterError("unknown engine '" + e + "'");
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("path config: ") + e.what());
  }
  return c;
}

json to_json(const sampling::StrainPath& p) {
  return {{"path_id", p.path_id}, {"seed", p.seed}, {"attempts", p.attempts}, {"steps", matrix_to_json(p.steps)}};
}

sampling::StrainPath path_from_json(const json& j) {
  sampling::StrainPath p;
  p.path_id = j.at("path_id").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  read_opt(j, "attempts", p.attempts);
  p.steps = matrix_from_json(j.at("steps"));
  return p;
}

json to_json(const micro::ResponseRecord& r) {
  return {{"path_id", r.path_id},
          {"strain", matrix_to_json(r.strain)},
          {"stress", matrix_to_json(r.stress)},
          {"damage", vector_to_json(r.damage)},
          {"work", vector_to_json(r.work)},
          {"damage_corrections", r.damage_corrections},
          {"refined_steps", r.refined_steps},
          {"max_hill_mandel", r.max_hill_mandel}};
}

micro::ResponseRecord record_from_json(const json& j) {
  micro::ResponseRecord r;
  r.path_id = j.at("path_id").get<int>();
  r.strain = matrix_from_json(j.at("strain"));
  r.stress = matrix_from_json(j.at("stress"));
  r.damage = vector_from_json(j.at("damage"));
  r.work = vector_from_json(j.at("work"));
  read_opt(j, "damage_corrections", r.damage_corrections);
  read_opt(j, "refined_steps", r.refined_steps);
  read_opt(j, "max_hill_mandel", r.max_hill_mandel);
  return r;
}

json to_json(const surrogate::Architecture& a) {
  return {{"cell", a.cell == surrogate::CellType::gru ? "gru" : "rnn"},
          {"output", a.output == surrogate::OutputMode::constrained ? "constrained" : "direct"},
          {"layers", a.layers},
          {"hidden", a.hidden},
          {"head_hidden", a.head_hidden},
          {"head_layers", a.head_layers},
          {"look_back", a.look_back}};
}

surrogate::Architecture architecture_from_json(const json& j) {
  surrogate::Architecture a;
  if (j.contains("cell")) {
    const auto c = j.at("cell").get<std::string>();
    if (c == "gru") a.cell = surrogate::CellType::gru;
    else if (c == "rnn") a.cell = surrogate::CellType::rnn;
    else throw ParameterError("unknown cell '" + c + "'");
  }
  if (j.contains("output")) {
    const auto o = j.at("output").get<std::string>();
    if (o == "constrained") a.output = surrogate::OutputMode::constrained;
    else if (o == "direct") a.output = surrogate::OutputMode::direct;
    else throw ParameterError("unknown output mode '" + o + "'");
  }
  read_opt(j, "layers", a.layers);
  read_opt(j, "hidden", a.hidden);
  read_opt(j, "head_hidden", a.head_hidden);
  read_opt(j, "head_layers", a.head_layers);
  read_opt(j, "look_back", a.look_back);
  return a;
}

json to_json(const surrogate::TrainingConfig& c) {
  return {{"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"learning_rate", c.learning_rate},
          {"lr_factor", c.lr_factor},
          {"lr_patience", c.lr_patience},
          {"early_stop_delta", c.early_stop_delta},
          {"early_stop_patience", c.early_stop_patience},
          {"lambda", c.lambda},
          {"seed", c.seed},
          {"validation_fraction", c.validation_fraction}};
}

surrogate::TrainingConfig training_config_from_json(const json& j) {
  surrogate::TrainingConfig c;
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "max_epochs", c.max_epochs);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "lr_factor", c.lr_factor);
  read_opt(j, "lr_patience", c.lr_patience);
  read_opt(j, "early_stop_delta", c.early_stop_delta);
  read_opt(j, "early_stop_patience", c.early_stop_patience);
  read_opt(j, "lambda", c.lambda);
  read_opt(j, "seed", c.seed);
  read_opt(j, "validation_fraction", c.validation_fraction);
  c.validate();
  return c;
}

json model_to_json(const surrogate::SurrogateModel& m, const json& config_echo) {
  json params = json::object();
  const auto names = m.parameter_names();
  const auto ps = m.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) params[names[i]] = dense_to_json(*ps[i]);
  json acts = json::object();
  const std::pair<const char*, const surrogate::Ffnn*> heads[] = {
      {"stress_head", &m.stress_head}, {"damage_head", &m.damage_head}, {"output_head", &m.output_head}};
  for (const auto& [name, net] : heads) {
    json a = json::array();
    for (const auto& l : net->layers) a.push_back(l.activation == surrogate::Activation::tanh ? "tanh" : "identity");
    acts[name] = a;
  }
  return {{"format", "pcrnn-surrogate"},
          {"version", kModelFormatVersion},
          {"config", config_echo},
          {"architecture", to_json(m.arch)},
          {"n_load", m.n_load},
          {"normalization",
           {{"strain_mid", vector_to_json(m.norm.strain_mid)},
            {"strain_half", vector_to_json(m.norm.strain_half)},
            {"out_mid", vector_to_json(m.norm.out_mid)},
            {"out_half", vector_to_json(m.norm.out_half)}}},
          {"activations", acts},
          {"parameters", params}};
}

surrogate::SurrogateModel model_from_json(const json& j) {
  try {
    if (j.value("format", "") != "pcrnn-surrogate") throw ArtifactError("not a surrogate model document");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw ArtifactError("unsupported model version " + j.at("version").dump());
    const auto arch = architecture_from_json(j.at("architecture"));
    surrogate::SurrogateModel m = surrogate::init_model(arch, j.at("n_load").get<int>(), 0);
    const json& n = j.at("normalization");
    m.norm.strain_mid = vector_from_json(n.at("strain_mid"));
    m.norm.strain_half = vector_from_json(n.at("strain_half"));
    m.norm.out_mid = vector_from_json(n.at("out_mid"));
    m.norm.out_half = vector_from_json(n.at("out_half"));
    if (m.norm.strain_mid.size() != 6 || m.norm.strain_half.size() != 6 || m.norm.out_mid.size() != 7 ||
        m.norm.out_half.size() != 7)
      throw ArtifactError("normalization vectors have the wrong size");
    const auto names = m.parameter_names();
    auto ps = m.parameters();
    const json& params = j.at("parameters");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Eigen::MatrixXd v = dense_from_json(params.at(names[i]));
      if (v.rows() != ps[i]->rows() || v.cols() != ps[i]->cols())
        throw ArtifactError("parameter " + names[i] + " has the wrong shape");
      *ps[i] = std::move(v);
    }
    return m;
  } catch (const json::exception& e) {
    throw ArtifactError(std::string("model: ") + e.what());
  }
}

namespace {

std::vector<double> schedule_from_json(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  const auto type = j.at("type").get<std::string>();
  const int n = j.at("steps").get<int>();
  if (n < 1) throw ParameterError("schedule needs at least one step");
  std::vector<double> s;
  if (type == "ramp") {
    const double d = j.at("max").get<double>();
    for (int i = 1; i <= n; ++i) s.push_back(d * i / n);
  } else if (type == "cyclic") {
    // 0 -> +a -> 0 -> -a in three equal legs.
    const double a = j.at("amplitude").get<double>();
    for (int i = 1; i <= n; ++i) {
      const double x = 3.0 * i / n;
      s.push_back(x <= 1.0 ? a * x : x <= 2.0 ? a * (2.0 - x) : -a * (x - 2.0));
    }
  } else {
    throw ParameterError("unknown schedule type '" + type + "'");
  }
  return s;
}

}  // namespace

macro::MacroProblem problem_from_json(const json& j) {
  try {
    const std::vector<double> schedule = schedule_from_json(j.at("schedule"));
    const json& mj = j.at("mesh");
    macro::MacroProblem p;
    if (mj.contains("fixture")) {
      const auto name = mj.at("fixture").get<std::string>();
      if (name == "one_element") p = macro::one_element_problem(schedule);
      else if (name == "cube") p = macro::cube_problem(mj.value("size", 1.0), schedule);
      else if (name == "notched_bar") p = macro::notched_bar_problem(mj.value("level", 0), schedule);
      else throw ParameterError("unknown mesh fixture '" + name + "'");
    } else {
      for (const auto& n : mj.at("nodes")) p.mesh.nodes.emplace_back(n.at(0).get<double>(), n.at(1).get<double>(), n.at(2).get<double>());
      for (const auto& e : mj.at("elements")) p.mesh.elements.push_back(e.get<std::array<int, 4>>());
      p.mesh.phase.assign(p.mesh.elements.size(), mesh::kMatrix);
      p.schedule = schedule;
      p.set_binding(macro::Binding::mono);
    }
    if (j.contains("dirichlet")) {
      p.dirichlet.clear();
      for (const auto& s : j.at("dirichlet"))
        p.dirichlet.push_back({s.at("name").get<std::string>(), s.at("nodes").get<std::vector<int>>(),
                               s.at("component").get<int>(), s.value("scale", 0.0)});
    }
    read_opt(j, "driven", p.driven);
    if (j.contains("mode")) p.set_binding(macro::parse_binding(j.at("mode").get<std::string>()));
    if (j.contains("binding")) {
      p.binding.clear();
      for (const auto& b : j.at("binding")) p.binding.push_back(macro::parse_binding(b.get<std::string>()));
    }
    read_opt(j, "nonlocal_length", p.nonlocal_length);
    read_opt(j, "nonlocal_multiscale", p.nonlocal_multiscale);
    read_opt(j, "macro_damage", p.macro_damage);
    read_opt(j, "tolerance", p.tolerance);
    read_opt(j, "max_iterations", p.max_iterations);
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw ParameterError(std::string("problem: ") + e.what());
  }
}

std::string to_jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<json> parse_jsonl(const std::string& text, const std::string& source) {
  std::vector<json> rows;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ArtifactError(source + ":" + std::to_string(number) + ": parse error at byte " +
                          std::to_string(e.byte) + ": " + e.what());
    }
  }
  return rows;
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ArtifactError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

}  // namespace pcrnn::io
