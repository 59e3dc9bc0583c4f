#include "network.hpp"

#include <algorithm>

namespace pcrnn::surrogate::detail {

namespace {

Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace

BatchState initial_batch_state(const SurrogateModel& model, Eigen::Index batch) {
  BatchState s;
  s.h.assign(static_cast<std::size_t>(model.arch.layers), Matrix::Zero(model.arch.hidden, batch));
  s.raw = Matrix::Zero(1, batch);
  s.damage = Matrix::Zero(1, batch);
  return s;
}

Matrix dense_forward(const Ffnn& net, const Matrix& in, DenseCache* cache) {
  Matrix a = in;
  if (cache) {
    cache->in.clear();
    cache->out.clear();
  }
  for (const DenseLayer& layer : net.layers) {
    Matrix z = layer.W * a;
    z.colwise() += layer.b.col(0);
    if (layer.activation == Activation::tanh) z = z.array().tanh().matrix();
    if (cache) {
      cache->in.push_back(a);
      cache->out.push_back(z);
    }
    a = std::move(z);
  }
  return a;
}

Matrix dense_backward(const Ffnn& net, const DenseCache& cache, const Matrix& g_out, Ffnn& grad) {
  Matrix g = g_out;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const DenseLayer& layer = net.layers[l];
    if (layer.activation == Activation::tanh)
      g = (g.array() * (1.0 - cache.out[l].array().square())).matrix();
    grad.layers[l].W.noalias() += g * cache.in[l].transpose();
    grad.layers[l].b += g.rowwise().sum();
    g = layer.W.transpose() * g;
  }
  return g;
}

Matrix gru_backward(const GruLayer& p, const LayerCache& c, const Matrix& dh, GruLayer& g, Matrix& dx) {
  g.b_h += dh.rowwise().sum();
  const Matrix d_u = (dh.array() * (c.h_prev.array() - c.c.array())).matrix();
  const Matrix d_c = (dh.array() * (1.0 - c.u.array())).matrix();
  Matrix dh_prev = (dh.array() * c.u.array()).matrix();

  const Matrix d_ac = (d_c.array() * (1.0 - c.c.array().square())).matrix();
  const Matrix d_r = (d_ac.array() * c.m.array()).matrix();
  const Matrix d_m = (d_ac.array() * c.r.array()).matrix();
  const Matrix d_ar = (d_r.array() * c.r.array() * (1.0 - c.r.array())).matrix();
  const Matrix d_au = (d_u.array() * c.u.array() * (1.0 - c.u.array())).matrix();

  g.W_xc.noalias() += d_ac * c.x.transpose();
  g.b_c += d_ac.rowwise().sum();
  g.W_hc.noalias() += d_m * c.h_prev.transpose();
  g.W_hr.noalias() += d_ar * c.h_prev.transpose();
  g.W_xr.noalias() += d_ar * c.x.transpose();
  g.b_r += d_ar.rowwise().sum();
  g.W_hu.noalias() += d_au * c.h_prev.transpose();
  g.W_xu.noalias() += d_au * c.x.transpose();
  g.b_u += d_au.rowwise().sum();

  dh_prev.noalias() += p.W_hc.transpose() * d_m;
  dh_prev.noalias() += p.W_hr.transpose() * d_ar;
  dh_prev.noalias() += p.W_hu.transpose() * d_au;
  dx = p.W_xc.transpose() * d_ac;
  dx.noalias() += p.W_xr.transpose() * d_ar;
  dx.noalias() += p.W_xu.transpose() * d_au;
  return dh_prev;
}

Matrix rnn_backward(const RnnLayer& p, const LayerCache& c, const Matrix& dh, RnnLayer& g, Matrix& dx) {
  const Matrix d_a = (dh.array() * (1.0 - c.h.array().square())).matrix();
  g.W_hh.noalias() += d_a * c.h_prev.transpose();
  g.W_xh.noalias() += d_a * c.x.transpose();
  g.b_h += d_a.rowwise().sum();
  dx = p.W_xh.transpose() * d_a;
  return p.W_hh.transpose() * d_a;
}

void step_forward(const SurrogateModel& model, const Matrix& x, const BatchState& prev, bool first,
                  BatchState& next, StepCache& cache) {
  const auto& arch = model.arch;
  const Eigen::Index B = x.cols();
  cache.first = first;
  cache.layers.resize(static_cast<std::size_t>(arch.layers));
  next.h.resize(static_cast<std::size_t>(arch.layers));

  Matrix input = x;
  for (int l = 0; l < arch.layers; ++l) {
    const std::size_t ll = static_cast<std::size_t>(l);
    LayerCache& c = cache.layers[ll];
    c.x = input;
    c.h_prev = prev.h[ll];
    if (arch.cell == CellType::gru) {
      const GruLayer& p = model.gru[ll];
      Matrix a_r = p.W_hr * c.h_prev;
      a_r.noalias() += p.W_xr * c.x;
      a_r.colwise() += p.b_r.col(0);
      c.r = sigmoid(a_r);
      Matrix a_u = p.W_hu * c.h_prev;
      a_u.noalias() += p.W_xu * c.x;
      a_u.colwise() += p.b_u.col(0);
      c.u = sigmoid(a_u);
      c.m = p.W_hc * c.h_prev;
      Matrix a_c = (c.r.array() * c.m.array()).matrix();
      a_c.noalias() += p.W_xc * c.x;
      a_c.colwise() += p.b_c.col(0);
      c.c = a_c.array().tanh().matrix();
      c.h = (c.u.array() * c.h_prev.array() + (1.0 - c.u.array()) * c.c.array()).matrix();
      c.h.colwise() += p.b_h.col(0);
    } else {
      const RnnLayer& p = model.rnn[ll];
      Matrix a = p.W_hh * c.h_prev;
      a.noalias() += p.W_xh * c.x;
      a.colwise() += p.b_h.col(0);
      c.h = a.array().tanh().matrix();
    }
    next.h[ll] = c.h;
    input = c.h;
  }
  const Matrix& top = input;
  const Normalization& nm = model.norm;
  const Eigen::ArrayXd s_mid = nm.out_mid.head<6>().array();
  const Eigen::ArrayXd s_half = nm.out_half.head<6>().array();
  const double d_mid = nm.out_mid(6), d_half = nm.out_half(6);

  cache.yhat.resize(kOutputs, B);
  if (arch.output == OutputMode::constrained) {
    cache.s0n = dense_forward(model.stress_head, top, &cache.stress_head);
    const Matrix logit = dense_forward(model.damage_head, top, &cache.damage_head);
    cache.raw = sigmoid(logit);
    if (first) {
      cache.increment = Matrix::Zero(1, B);
      cache.sum = cache.raw;
    } else {
      cache.increment = cache.raw - prev.raw;
      cache.sum = prev.damage + cache.increment.cwiseMax(0.0);
    }
    cache.damage = cache.sum.cwiseMax(0.0).cwiseMin(1.0);
    cache.S0 = ((cache.s0n.array().colwise() * s_half).colwise() + s_mid).matrix();
    cache.S = (cache.S0.array().rowwise() * (1.0 - cache.damage.array()).row(0)).matrix();
    cache.yhat.topRows<6>() = ((cache.S.array().colwise() - s_mid).colwise() / s_half).matrix();
    cache.yhat.row(6) = ((cache.damage.array() - d_mid) / d_half).matrix();
  } else {
    cache.yhat = dense_forward(model.output_head, top, &cache.output_head);
    cache.S = ((cache.yhat.topRows<6>().array().colwise() * s_half).colwise() + s_mid).matrix();
    cache.S0 = cache.S;
    cache.damage = (cache.yhat.row(6).array() * d_half + d_mid).matrix();
    cache.raw = cache.damage;
  }
  next.raw = cache.raw;
  next.damage = cache.damage;
}

}  // namespace pcrnn::surrogate::detail
