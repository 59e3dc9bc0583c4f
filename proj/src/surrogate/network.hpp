#pragma once

// Batched forward and reverse passes shared by inference and training.
// Batches are stored column-wise.

#include <vector>

#include "pcrnn/surrogate/model.hpp"

namespace pcrnn::surrogate::detail {

struct LayerCache {
  Matrix x, h_prev, r, u, m, c, h;  // rnn cells use x, h_prev, h
};

struct DenseCache {
  std::vector<Matrix> in;   // input of each layer
  std::vector<Matrix> out;  // activated output of each layer
};

struct StepCache {
  bool first = true;
  std::vector<LayerCache> layers;
  DenseCache stress_head, damage_head, output_head;
  Matrix s0n;        // 6 x B normalized reference stress
  Matrix raw;        // 1 x B squashed damage
  Matrix increment;  // 1 x B raw_t - raw_{t-1}
  Matrix sum;        // 1 x B corrected damage before the clamp
  Matrix damage;     // 1 x B corrected damage
  Matrix S0, S;      // 6 x B physical
  Matrix yhat;       // 7 x B normalized outputs
};

struct BatchState {
  std::vector<Matrix> h;
  Matrix raw, damage;  // 1 x B
};

BatchState initial_batch_state(const SurrogateModel& model, Eigen::Index batch);

Matrix dense_forward(const Ffnn& net, const Matrix& in, DenseCache* cache);
/// Accumulates parameter gradients into `grad` and returns d/d(input).
Matrix dense_backward(const Ffnn& net, const DenseCache& cache, const Matrix& g_out, Ffnn& grad);

/// Accumulates into `grad`; returns d/d(h_prev) and writes d/d(x) to `dx`.
Matrix gru_backward(const GruLayer& p, const LayerCache& c, const Matrix& dh, GruLayer& grad, Matrix& dx);
Matrix rnn_backward(const RnnLayer& p, const LayerCache& c, const Matrix& dh, RnnLayer& grad, Matrix& dx);

/// One step for the whole batch. `x` is the normalized input (input_width x B).
void step_forward(const SurrogateModel& model, const Matrix& x, const BatchState& prev, bool first,
                  BatchState& next, StepCache& cache);

}  // namespace pcrnn::surrogate::detail
