#pragma once

#include <cstdint>
#include <vector>

#include "pcrnn/surrogate/loss.hpp"

namespace pcrnn::surrogate {

struct TrainingConfig {
  int batch_size = 64;
  int max_epochs = 1200;
  double learning_rate = 1e-3;
  double lr_factor = 0.75;
  int lr_patience = 30;
  double early_stop_delta = 1e-7;
  int early_stop_patience = 50;
  double lambda = 1e-6;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double penalty = 0.0;  // mean work term over training batches
  double lr = 0.0;
};

struct TrainingResult {
  SurrogateModel model;  // best validation checkpoint
  std::vector<EpochStats> history;
  int best_epoch = 0;
  std::vector<int> train_index;  // positions in the input set
  std::vector<int> val_index;
};

/// Per-channel map of the training data onto [-1, 1]. Constant channels get unit scale.
Normalization fit_normalization(const std::vector<const Sequence*>& data);

/// Deterministic split into (train, validation) positions.
std::pair<std::vector<int>, std::vector<int>> split_indices(int n, double fraction, std::uint64_t seed);

/// Adam on the penalized loss with teacher forcing on look-back inputs.
/// Validation loss is evaluated free-running. Normalization is refit on the
/// training split before the first epoch.
TrainingResult train(const SurrogateModel& initial, const std::vector<Sequence>& data, const TrainingConfig& config);

struct MseReport {
  double mse = 0.0, mse_s = 0.0, mse_d = 0.0;  // normalized outputs
  double mse_phys = 0.0, mse_s_phys = 0.0, mse_d_phys = 0.0;
};

/// Mean squared errors of free-running predictions over a test set.
MseReport evaluate_mse(const SurrogateModel& model, const std::vector<Sequence>& test);

}  // namespace pcrnn::surrogate
