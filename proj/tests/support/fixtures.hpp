#pragma once

// Shared fixtures for unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include "pcrnn/surrogate/loss.hpp"
#include "pcrnn/surrogate/model.hpp"

namespace fixtures {

using pcrnn::surrogate::Matrix;
using pcrnn::surrogate::Sequence;
using pcrnn::surrogate::SurrogateModel;

/// Smooth random sequences with a damage history that rises and plateaus.
inline std::vector<Sequence> random_sequences(int n, int T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<Sequence> out;
  for (int i = 0; i < n; ++i) {
    Sequence s;
    s.strain = pcrnn::sampling::PathMatrix::Zero(T, 6);
    s.stress = pcrnn::sampling::PathMatrix::Zero(T, 6);
    s.damage = Eigen::VectorXd::Zero(T);
    for (int t = 1; t < T; ++t)
      for (int j = 0; j < 6; ++j) s.strain(t, j) = s.strain(t - 1, j) + 0.01 * z(rng);
    double d = 0.0;
    for (int t = 0; t < T; ++t) {
      d = std::min(1.0, d + 0.05 * std::abs(z(rng)));
      s.damage(t) = d;
      for (int j = 0; j < 6; ++j) s.stress(t, j) = 2.0e4 * s.strain(t, j) * (1.0 - d) + 10.0 * z(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Fills a normalization roughly matched to `random_sequences`.
inline void rough_normalization(SurrogateModel& m) {
  m.norm.strain_mid.setZero();
  m.norm.strain_half.setConstant(0.05);
  m.norm.out_mid.setZero();
  m.norm.out_half.head<6>().setConstant(500.0);
  m.norm.out_mid(6) = 0.5;
  m.norm.out_half(6) = 0.5;
}

/// Largest |a - b| / max(|a|, |b|, floor) between analytic and central-difference gradients.
/// The floor keeps round-off in the difference quotient (about 1e-11 here) from
/// dominating entries whose gradient is itself near zero.
template <class Loss>
double max_gradient_error(SurrogateModel model, const SurrogateModel& grad, Loss&& loss, double eps,
                          double floor = 1e-6) {
  double worst = 0.0;
  auto params = model.parameters();
  const auto grads = grad.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double keep = p.data()[i];
      p.data()[i] = keep + eps;
      const double up = loss(model);
      p.data()[i] = keep - eps;
      const double down = loss(model);
      p.data()[i] = keep;
      const double fd = (up - down) / (2.0 * eps);
      const double an = grads[k]->data()[i];
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor}));
    }
  }
  return worst;
}

}  // namespace fixtures
