#include "pcrnn/surrogate/loss.hpp"

#include <cmath>
#include <string>

#include "network.hpp"
#include "pcrnn/error.hpp"

namespace pcrnn::surrogate {

namespace {

struct BatchPass {
  std::vector<detail::StepCache> steps;
  std::vector<Matrix> y;   // 7 x B normalized truth per step
  std::vector<Matrix> dE;  // 6 x B strain increment per step
  std::vector<Matrix> W;   // 1 x B cumulative work per step
  LossBreakdown loss;
};

Eigen::Index checked_length(const SurrogateModel& model, std::span<const Sequence* const> batch) {
  if (batch.empty()) throw ParameterError("empty batch");
  const Eigen::Index T = model.n_load;
  for (const Sequence* s : batch) {
    if (s->strain.rows() != T || s->stress.rows() != T || s->damage.size() != T)
      throw ParameterError("sequence length does not match the model's n_load");
  }
  return T;
}

BatchPass run_forward(const SurrogateModel& model, std::span<const Sequence* const> batch, double lambda,
                      Forcing forcing) {
  const Eigen::Index T = checked_length(model, batch);
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const int nlb = model.arch.look_back;
  const Normalization& nm = model.norm;

  BatchPass pass;
  pass.steps.resize(static_cast<std::size_t>(T));
  pass.y.resize(static_cast<std::size_t>(T));
  pass.dE.resize(static_cast<std::size_t>(T));
  pass.W.resize(static_cast<std::size_t>(T));
  pass.loss.data_t.assign(static_cast<std::size_t>(T), 0.0);
  pass.loss.penalty_t.assign(static_cast<std::size_t>(T), 0.0);

  for (Eigen::Index t = 0; t < T; ++t) {
    Matrix& y = pass.y[static_cast<std::size_t>(t)];
    Matrix& dE = pass.dE[static_cast<std::size_t>(t)];
    y.resize(kOutputs, B);
    dE.resize(6, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Sequence& s = *batch[static_cast<std::size_t>(b)];
      y.col(b).head<6>() = ((s.stress.row(t).transpose().array() - nm.out_mid.head<6>().array()) /
                            nm.out_half.head<6>().array()).matrix();
      y(6, b) = (s.damage(t) - nm.out_mid(6)) / nm.out_half(6);
      dE.col(b) = t == 0 ? Vec6(s.strain.row(0).transpose()) : Vec6((s.strain.row(t) - s.strain.row(t - 1)).transpose());
    }
  }

  detail::BatchState state = detail::initial_batch_state(model, B);
  Matrix x(model.input_width(), B);
  Matrix work = Matrix::Zero(1, B);
  for (Eigen::Index t = 0; t < T; ++t) {
    const std::size_t ts = static_cast<std::size_t>(t);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Sequence& s = *batch[static_cast<std::size_t>(b)];
      x.col(b).head<6>() =
          ((s.strain.row(t).transpose().array() - nm.strain_mid.array()) / nm.strain_half.array()).matrix();
    }
    for (int j = 0; j < nlb; ++j) {
      const Eigen::Index src = t - 1 - j;
      auto slot = x.middleRows(6 + kOutputs * j, kOutputs);
      if (src < 0) slot.setZero();
      else if (forcing == Forcing::teacher) slot = pass.y[static_cast<std::size_t>(src)];
      else slot = pass.steps[static_cast<std::size_t>(src)].yhat;
    }
    detail::BatchState next;
    detail::step_forward(model, x, state, t == 0, next, pass.steps[ts]);
    state = std::move(next);

    const detail::StepCache& c = pass.steps[ts];
    const Matrix e = c.yhat - pass.y[ts];
    pass.loss.data_t[ts] = e.colwise().norm().sum() / (kOutputs * static_cast<double>(B));
    work += (c.S.array() * pass.dE[ts].array()).colwise().sum().matrix();
    pass.W[ts] = work;
    pass.loss.penalty_t[ts] = (-work.array()).max(0.0).sum() / static_cast<double>(B);
    pass.loss.data += pass.loss.data_t[ts];
    pass.loss.penalty += pass.loss.penalty_t[ts];
  }
  pass.loss.total = pass.loss.data + lambda * pass.loss.penalty;
  return pass;
}

void add_dense(Ffnn& grad, const Ffnn& model, const detail::DenseCache& cache, const Matrix& g_out, Matrix& g_top) {
  const Matrix g_in = detail::dense_backward(model, cache, g_out, grad);
  g_top += g_in;
}

}  // namespace

double work_penalty(std::span<const PathMatrix> stress, std::span<const PathMatrix> strain) {
  if (stress.size() != strain.size() || stress.empty()) throw ParameterError("work_penalty needs matching non-empty batches");
  double sum = 0.0;
  for (std::size_t b = 0; b < stress.size(); ++b) {
    if (stress[b].rows() != strain[b].rows()) throw ParameterError("work_penalty needs equal lengths");
    double w = 0.0;
    for (Eigen::Index t = 0; t < stress[b].rows(); ++t) {
      const Vec6 dE = t == 0 ? Vec6(strain[b].row(0).transpose())
                             : Vec6((strain[b].row(t) - strain[b].row(t - 1)).transpose());
      w += stress[b].row(t).dot(dE.transpose());
    }
    sum += std::max(-w, 0.0);
  }
  return sum / static_cast<double>(stress.size());
}

LossBreakdown loss_total(const SurrogateModel& model, std::span<const Sequence* const> batch, double lambda,
                         Forcing forcing) {
  if (lambda < 0.0) throw ParameterError("penalty weight must be non-negative");
  return run_forward(model, batch, lambda, forcing).loss;
}

Gradients bptt_gradients(const SurrogateModel& model, std::span<const Sequence* const> batch, double lambda) {
  if (lambda < 0.0) throw ParameterError("penalty weight must be non-negative");
  BatchPass pass = run_forward(model, batch, lambda, Forcing::teacher);
  const Eigen::Index T = model.n_load;
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const int L = model.arch.layers;
  const bool constrained = model.arch.output == OutputMode::constrained;
  const Normalization& nm = model.norm;
  const Eigen::ArrayXd s_half = nm.out_half.head<6>().array();
  const double d_half = nm.out_half(6);

  Gradients out{model.zeros_like(), pass.loss};
  SurrogateModel& g = out.grad;

  // Number of later steps whose cumulative work is negative, per sample.
  Matrix active = Matrix::Zero(1, B);
  std::vector<Matrix> dh(static_cast<std::size_t>(L), Matrix::Zero(model.arch.hidden, B));
  Matrix g_damage_carry = Matrix::Zero(1, B);
  Matrix g_raw_carry = Matrix::Zero(1, B);

  for (Eigen::Index t = T; t-- > 0;) {
    const std::size_t ts = static_cast<std::size_t>(t);
    const detail::StepCache& c = pass.steps[ts];

    // Data term on normalized outputs.
    const Matrix e = c.yhat - pass.y[ts];
    Matrix g_yhat(kOutputs, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const double n = e.col(b).norm();
      g_yhat.col(b) = n > 0.0 ? Eigen::VectorXd(e.col(b) / (n * kOutputs * static_cast<double>(B)))
                              : Eigen::VectorXd::Zero(kOutputs);
    }
    // Work term on physical stress.
    active += (pass.W[ts].array() < 0.0).cast<double>().matrix();
    const Matrix g_S_pen =
        (pass.dE[ts].array().rowwise() * active.array().row(0) * (-lambda / static_cast<double>(B))).matrix();

    Matrix g_top = Matrix::Zero(model.arch.hidden, B);
    if (constrained) {
      const Matrix g_S = ((g_yhat.topRows<6>().array().colwise() / s_half) + g_S_pen.array()).matrix();
      Matrix g_D = g_yhat.row(6) / d_half + g_damage_carry;
      g_D -= (c.S0.array() * g_S.array()).colwise().sum().matrix();
      const Matrix g_S0 = (g_S.array().rowwise() * (1.0 - c.damage.array()).row(0)).matrix();
      const Matrix g_s0n = (g_S0.array().colwise() * s_half).matrix();

      Matrix g_raw = g_raw_carry;
      g_damage_carry.setZero();
      g_raw_carry.setZero();
      for (Eigen::Index b = 0; b < B; ++b) {
        const double sum = c.sum(0, b);
        const double gs = (sum > 0.0 && sum < 1.0) ? g_D(0, b) : 0.0;
        if (c.first) {
          g_raw(0, b) += gs;
        } else {
          g_damage_carry(0, b) = gs;
          if (c.increment(0, b) > 0.0) {
            g_raw(0, b) += gs;
            g_raw_carry(0, b) = -gs;
          }
        }
      }
      const Matrix g_logit = (g_raw.array() * c.raw.array() * (1.0 - c.raw.array())).matrix();
      add_dense(g.stress_head, model.stress_head, c.stress_head, g_s0n, g_top);
      add_dense(g.damage_head, model.damage_head, c.damage_head, g_logit, g_top);
    } else {
      Matrix g_out = g_yhat;
      g_out.topRows<6>() += (g_S_pen.array().colwise() * s_half).matrix();
      add_dense(g.output_head, model.output_head, c.output_head, g_out, g_top);
    }

    Matrix d_in = g_top;
    for (int l = L; l-- > 0;) {
      const std::size_t ll = static_cast<std::size_t>(l);
      const Matrix d_h = d_in + dh[ll];
      Matrix dx;
      if (model.arch.cell == CellType::gru)
        dh[ll] = detail::gru_backward(model.gru[ll], c.layers[ll], d_h, g.gru[ll], dx);
      else
        dh[ll] = detail::rnn_backward(model.rnn[ll], c.layers[ll], d_h, g.rnn[ll], dx);
      d_in = std::move(dx);
    }
  }

  const auto names = model.parameter_names();
  const auto params = g.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!params[i]->allFinite()) throw TrainingError("non-finite gradient in " + names[i]);
  return out;
}

}  // namespace pcrnn::surrogate
