#include "pcrnn/surrogate/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "pcrnn/error.hpp"
#include "pcrnn/util.hpp"

namespace pcrnn::surrogate {

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ParameterError("batch_size must be positive");
  if (max_epochs < 1) throw ParameterError("max_epochs must be positive");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) throw ParameterError("lr_factor must lie in (0, 1]");
  if (lr_patience < 1 || early_stop_patience < 1) throw ParameterError("patience must be positive");
  if (early_stop_delta < 0.0) throw ParameterError("early_stop_delta must be non-negative");
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be non-negative");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ParameterError("validation_fraction must lie in (0, 1)");
}

Normalization fit_normalization(const std::vector<const Sequence*>& data) {
  if (data.empty()) throw ParameterError("cannot normalize an empty set");
  Eigen::VectorXd lo_e = Eigen::VectorXd::Constant(6, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi_e = -lo_e;
  Eigen::VectorXd lo_y = Eigen::VectorXd::Constant(kOutputs, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi_y = -lo_y;
  for (const Sequence* s : data) {
    lo_e = lo_e.cwiseMin(s->strain.colwise().minCoeff().transpose());
    hi_e = hi_e.cwiseMax(s->strain.colwise().maxCoeff().transpose());
    lo_y.head<6>() = lo_y.head<6>().cwiseMin(s->stress.colwise().minCoeff().transpose());
    hi_y.head<6>() = hi_y.head<6>().cwiseMax(s->stress.colwise().maxCoeff().transpose());
    lo_y(6) = std::min(lo_y(6), s->damage.minCoeff());
    hi_y(6) = std::max(hi_y(6), s->damage.maxCoeff());
  }
  auto half = [](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd h = 0.5 * (hi - lo);
    for (Eigen::Index i = 0; i < h.size(); ++i)
      if (!(h(i) > 1e-12)) h(i) = 1.0;
    return h;
  };
  Normalization n;
  n.strain_mid = 0.5 * (lo_e + hi_e);
  n.strain_half = half(lo_e, hi_e);
  n.out_mid = 0.5 * (lo_y + hi_y);
  n.out_half = half(lo_y, hi_y);
  return n;
}

std::pair<std::vector<int>, std::vector<int>> split_indices(int n, double fraction, std::uint64_t seed) {
  if (n < 2) throw ParameterError("need at least two records to split");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, "split", 0));
  std::shuffle(idx.begin(), idx.end(), rng);
  const int n_val = std::clamp(static_cast<int>(std::lround(fraction * n)), 1, n - 1);
  std::vector<int> val(idx.begin(), idx.begin() + n_val);
  std::vector<int> tr(idx.begin() + n_val, idx.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  return {tr, val};
}

namespace {

struct Adam {
  std::vector<Matrix> m, v;
  int step = 0;
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-7;

  explicit Adam(const SurrogateModel& model) {
    for (const Matrix* p : model.parameters()) {
      m.push_back(Matrix::Zero(p->rows(), p->cols()));
      v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }

  void apply(SurrogateModel& model, const SurrogateModel& grad, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(kBeta1, step);
    const double c2 = 1.0 - std::pow(kBeta2, step);
    auto params = model.parameters();
    const auto grads = grad.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Matrix& gi = *grads[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi.cwiseProduct(gi);
      params[i]->array() -= lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + kEps);
    }
  }
};

}  // namespace

TrainingResult train(const SurrogateModel& initial, const std::vector<Sequence>& data, const TrainingConfig& config) {
  config.validate();
  if (data.size() < 2) throw ParameterError("training needs at least two records");
  auto [tr, val] = split_indices(static_cast<int>(data.size()), config.validation_fraction, config.seed);

  std::vector<const Sequence*> train_set, val_set;
  for (int i : tr) train_set.push_back(&data[static_cast<std::size_t>(i)]);
  for (int i : val) val_set.push_back(&data[static_cast<std::size_t>(i)]);

  SurrogateModel model = initial;
  model.norm = fit_normalization(train_set);

  TrainingResult result;
  result.train_index = tr;
  result.val_index = val;
  result.model = model;

  Adam adam(model);
  double lr = config.learning_rate;
  double best = std::numeric_limits<double>::infinity();
  double anchor = best;  // best value at the last meaningful improvement
  int since_best = 0, since_anchor = 0;

  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double train_loss = 0.0, penalty = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<const Sequence*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[static_cast<std::size_t>(order[i])]);
      const Gradients g = bptt_gradients(model, batch, config.lambda);
      if (!std::isfinite(g.loss.total))
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      adam.apply(model, g.grad, lr);
      train_loss += g.loss.total;
      penalty += g.loss.penalty;
      ++batches;
    }
    const double val_loss = loss_total(model, val_set, config.lambda, Forcing::free_running).total;
    if (!std::isfinite(val_loss))
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    result.history.push_back({epoch, train_loss / batches, val_loss, penalty / batches, lr});

    if (val_loss < best) {
      best = val_loss;
      result.model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.lr_patience) {
      lr *= config.lr_factor;
      since_best = 0;
    }
    if (val_loss < anchor - config.early_stop_delta) {
      anchor = val_loss;
      since_anchor = 0;
    } else if (++since_anchor >= config.early_stop_patience) {
      break;
    }
  }
  return result;
}

MseReport evaluate_mse(const SurrogateModel& model, const std::vector<Sequence>& test) {
  if (test.empty()) throw ParameterError("evaluate_mse needs a non-empty test set");
  const Normalization& nm = model.norm;
  double s_n = 0.0, d_n = 0.0, s_p = 0.0, d_p = 0.0;
  for (const Sequence& s : test) {
    const SequenceOutput out = forward_sequence(model, s.strain);
    const PathMatrix es = out.stress - s.stress;
    const Eigen::VectorXd ed = out.damage - s.damage;
    s_p += es.squaredNorm();
    d_p += ed.squaredNorm();
    s_n += (es.array().rowwise() / nm.out_half.head<6>().transpose().array()).square().sum();
    d_n += (ed / nm.out_half(6)).squaredNorm();
  }
  const double count = static_cast<double>(test.size()) * static_cast<double>(model.n_load);
  MseReport r;
  r.mse = (s_n + d_n) / (count * kOutputs);
  r.mse_s = s_n / (count * 6);
  r.mse_d = d_n / count;
  r.mse_phys = (s_p + d_p) / (count * kOutputs);
  r.mse_s_phys = s_p / (count * 6);
  r.mse_d_phys = d_p / count;
  return r;
}

}  // namespace pcrnn::surrogate
