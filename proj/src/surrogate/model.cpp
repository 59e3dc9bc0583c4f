#include "pcrnn/surrogate/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/QR>

#include "network.hpp"
#include "pcrnn/error.hpp"

namespace pcrnn::surrogate {

namespace {

void append(std::vector<Matrix*>& out, GruLayer& g) {
  for (Matrix* m : {&g.W_hr, &g.W_xr, &g.b_r, &g.W_hu, &g.W_xu, &g.b_u, &g.W_hc, &g.W_xc, &g.b_c, &g.b_h})
    out.push_back(m);
}

template <class Model>
auto collect(Model& model) {
  std::vector<Matrix*> out;
  auto& m = const_cast<SurrogateModel&>(model);
  for (auto& g : m.gru) append(out, g);
  for (auto& r : m.rnn)
    for (Matrix* p : {&r.W_hh, &r.W_xh, &r.b_h}) out.push_back(p);
  for (Ffnn* net : {&m.stress_head, &m.damage_head, &m.output_head})
    for (auto& layer : net->layers) {
      out.push_back(&layer.W);
      out.push_back(&layer.b);
    }
  return out;
}

Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix W(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) W(i, j) = dist(rng);
  return W;
}

Matrix orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix G(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) G(i, j) = dist(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  // Sign fix makes the draw uniform over the orthogonal group.
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  return Q;
}

Ffnn make_head(int in, int hidden, int hidden_layers, int out, std::mt19937_64& rng) {
  Ffnn net;
  int width = in;
  for (int l = 0; l < hidden_layers; ++l) {
    net.layers.push_back({glorot(hidden, width, rng), Matrix::Zero(hidden, 1), Activation::tanh});
    width = hidden;
  }
  net.layers.push_back({glorot(out, width, rng), Matrix::Zero(out, 1), Activation::identity});
  return net;
}

}  // namespace

std::vector<Matrix*> SurrogateModel::parameters() { return collect(*this); }

std::vector<const Matrix*> SurrogateModel::parameters() const {
  const auto ptrs = collect(*this);
  return std::vector<const Matrix*>(ptrs.begin(), ptrs.end());
}

std::vector<std::string> SurrogateModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < gru.size(); ++l)
    for (const char* n : {"W_hr", "W_xr", "b_r", "W_hu", "W_xu", "b_u", "W_hc", "W_xc", "b_c", "b_h"})
      names.push_back("gru" + std::to_string(l) + "." + n);
  for (std::size_t l = 0; l < rnn.size(); ++l)
    for (const char* n : {"W_hh", "W_xh", "b_h"}) names.push_back("rnn" + std::to_string(l) + "." + n);
  const std::pair<const char*, const Ffnn*> heads[] = {
      {"stress_head", &stress_head}, {"damage_head", &damage_head}, {"output_head", &output_head}};
  for (const auto& [name, net] : heads)
    for (std::size_t l = 0; l < net->layers.size(); ++l) {
      names.push_back(std::string(name) + "." + std::to_string(l) + ".W");
      names.push_back(std::string(name) + "." + std::to_string(l) + ".b");
    }
  return names;
}

std::size_t SurrogateModel::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* p : parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

SurrogateModel SurrogateModel::zeros_like() const {
  SurrogateModel z = *this;
  for (Matrix* p : z.parameters()) p->setZero();
  return z;
}

SurrogateModel init_model(const Architecture& arch, int n_load, std::uint64_t seed) {
  if (arch.layers < 1 || arch.hidden < 1 || arch.head_hidden < 1 || arch.head_layers < 0 || arch.look_back < 0)
    throw ParameterError("invalid surrogate architecture");
  if (n_load < 1) throw ParameterError("n_load must be positive");
  SurrogateModel m;
  m.arch = arch;
  m.n_load = n_load;
  std::mt19937_64 rng(seed);
  const int H = arch.hidden;
  for (int l = 0; l < arch.layers; ++l) {
    const int in = l == 0 ? m.input_width() : H;
    if (arch.cell == CellType::gru) {
      GruLayer g;
      g.W_xr = glorot(H, in, rng);
      g.W_xu = glorot(H, in, rng);
      g.W_xc = glorot(H, in, rng);
      g.W_hr = orthogonal(H, rng);
      g.W_hu = orthogonal(H, rng);
      g.W_hc = orthogonal(H, rng);
      g.b_r = g.b_u = g.b_c = g.b_h = Matrix::Zero(H, 1);
      m.gru.push_back(std::move(g));
    } else {
      m.rnn.push_back({orthogonal(H, rng), glorot(H, in, rng), Matrix::Zero(H, 1)});
    }
  }
  if (arch.output == OutputMode::constrained) {
    m.stress_head = make_head(H, arch.head_hidden, arch.head_layers, 6, rng);
    m.damage_head = make_head(H, arch.head_hidden, arch.head_layers, 1, rng);
  } else {
    m.output_head = make_head(H, arch.head_hidden, arch.head_layers, kOutputs, rng);
  }
  return m;
}

Matrix gru_cell_forward(const GruLayer& p, const Matrix& x, const Matrix& h_prev) {
  if (p.W_xr.cols() != x.rows() || h_prev.rows() != p.W_hr.rows() || x.cols() != h_prev.cols())
    throw ParameterError("GRU input shapes do not match the layer");
  auto gate = [&](const Matrix& Wh, const Matrix& Wx, const Matrix& b) {
    Matrix a = Wh * h_prev;
    a.noalias() += Wx * x;
    a.colwise() += b.col(0);
    return Matrix((1.0 + (-a.array()).exp()).inverse().matrix());
  };
  const Matrix r = gate(p.W_hr, p.W_xr, p.b_r);
  const Matrix u = gate(p.W_hu, p.W_xu, p.b_u);
  Matrix a_c = (r.array() * (p.W_hc * h_prev).array()).matrix();
  a_c.noalias() += p.W_xc * x;
  a_c.colwise() += p.b_c.col(0);
  Matrix h = (u.array() * h_prev.array() + (1.0 - u.array()) * a_c.array().tanh()).matrix();
  h.colwise() += p.b_h.col(0);
  return h;
}

Matrix rnn_cell_forward(const RnnLayer& p, const Matrix& x, const Matrix& h_prev) {
  if (p.W_xh.cols() != x.rows() || h_prev.rows() != p.W_hh.rows() || x.cols() != h_prev.cols())
    throw ParameterError("RNN input shapes do not match the layer");
  Matrix a = p.W_hh * h_prev;
  a.noalias() += p.W_xh * x;
  a.colwise() += p.b_h.col(0);
  return a.array().tanh().matrix();
}

std::vector<double> monotone_correct(std::span<const double> raw) {
  std::vector<double> out(raw.size());
  for (std::size_t t = 0; t < raw.size(); ++t) {
    if (t == 0) out[t] = std::clamp(raw[0], 0.0, 1.0);
    else out[t] = std::clamp(out[t - 1] + std::max(raw[t] - raw[t - 1], 0.0), 0.0, 1.0);
  }
  return out;
}

StepState initial_step_state(const SurrogateModel& model) {
  StepState s;
  s.hidden.assign(static_cast<std::size_t>(model.arch.layers), Eigen::VectorXd::Zero(model.arch.hidden));
  s.history = Eigen::MatrixXd::Zero(kOutputs, model.arch.look_back);
  return s;
}

namespace {

Matrix build_input(const SurrogateModel& model, const Vec6& strain, const Eigen::MatrixXd& history) {
  Matrix x(model.input_width(), 1);
  x.topRows<6>() = ((strain.array() - model.norm.strain_mid.array()) / model.norm.strain_half.array()).matrix();
  for (int j = 0; j < model.arch.look_back; ++j) x.block<kOutputs, 1>(6 + kOutputs * j, 0) = history.col(j);
  return x;
}

}  // namespace

StepOutput advance(const SurrogateModel& model, const StepState& state, const Vec6& strain, StepState& next) {
  if (state.step >= model.n_load) throw CapacityError("surrogate sequence capacity exceeded");
  detail::BatchState prev;
  for (const auto& h : state.hidden) prev.h.push_back(h);
  prev.raw = Matrix::Constant(1, 1, state.raw_damage);
  prev.damage = Matrix::Constant(1, 1, state.damage);
  detail::BatchState nb;
  detail::StepCache cache;
  detail::step_forward(model, build_input(model, strain, state.history), prev, state.step == 0, nb, cache);

  StepOutput out;
  out.reference_stress = cache.S0.col(0);
  out.stress = cache.S.col(0);
  out.raw_damage = cache.raw(0, 0);
  out.damage = cache.damage(0, 0);
  out.normalized = cache.yhat.col(0);

  next.step = state.step + 1;
  next.hidden.clear();
  for (const auto& h : nb.h) next.hidden.push_back(h.col(0));
  next.raw_damage = out.raw_damage;
  next.damage = out.damage;
  next.history = Eigen::MatrixXd::Zero(kOutputs, model.arch.look_back);
  if (model.arch.look_back > 0) {
    next.history.col(0) = out.normalized;
    for (int j = 1; j < model.arch.look_back; ++j) next.history.col(j) = state.history.col(j - 1);
  }
  return out;
}

SequenceOutput forward_sequence(const SurrogateModel& model, const PathMatrix& strain, const Teacher& teacher) {
  const Eigen::Index T = strain.rows();
  if (T != model.n_load) throw ParameterError("strain path length does not match the model's n_load");
  if (teacher.stress && (teacher.stress->rows() != T || !teacher.damage || teacher.damage->size() != T))
    throw ParameterError("teacher sequence length mismatch");

  SequenceOutput out;
  out.reference_stress.resize(T, 6);
  out.stress.resize(T, 6);
  out.raw_damage.resize(T);
  out.damage.resize(T);
  out.normalized.resize(T, kOutputs);
  out.hidden.assign(static_cast<std::size_t>(model.arch.layers), Matrix(T, model.arch.hidden));

  StepState state = initial_step_state(model);
  for (Eigen::Index t = 0; t < T; ++t) {
    StepState next;
    const StepOutput o = advance(model, state, strain.row(t).transpose(), next);
    out.reference_stress.row(t) = o.reference_stress.transpose();
    out.stress.row(t) = o.stress.transpose();
    out.raw_damage(t) = o.raw_damage;
    out.damage(t) = o.damage;
    out.normalized.row(t) = o.normalized.transpose();
    for (int l = 0; l < model.arch.layers; ++l)
      out.hidden[static_cast<std::size_t>(l)].row(t) = next.hidden[static_cast<std::size_t>(l)].transpose();
    if (teacher.stress && model.arch.look_back > 0) {
      // Replace the newest look-back slot with the normalized ground truth.
      Eigen::Matrix<double, kOutputs, 1> y;
      y.head<6>() = ((teacher.stress->row(t).transpose().array() - model.norm.out_mid.head<6>().array()) /
                     model.norm.out_half.head<6>().array()).matrix();
      y(6) = ((*teacher.damage)(t) - model.norm.out_mid(6)) / model.norm.out_half(6);
      next.history.col(0) = y;
    }
    state = std::move(next);
  }
  return out;
}

}  // namespace pcrnn::surrogate
