#pragma once

// Penalized sequence loss and its exact reverse-mode gradient.

#include <span>
#include <vector>

#include "pcrnn/surrogate/model.hpp"

namespace pcrnn::surrogate {

/// One strain path with its homogenized response (physical units).
struct Sequence {
  PathMatrix strain;
  PathMatrix stress;
  Eigen::VectorXd damage;
};

/// How look-back inputs are filled: ground truth (training) or the
/// model's own previous predictions (inference).
enum class Forcing { teacher, free_running };

struct LossBreakdown {
  double total = 0.0;
  double data = 0.0;     // sum over steps of the data term
  double penalty = 0.0;  // sum over steps of the work term, before lambda
  std::vector<double> data_t;
  std::vector<double> penalty_t;
};

/// Batch mean of ReLU(-W) where W is the cumulative work sum_t S_t . dE_t over
/// the whole sequence. Rows are time steps; dE_0 = E_0.
double work_penalty(std::span<const PathMatrix> stress, std::span<const PathMatrix> strain);

/// Per-step data term mean_b ||y - yhat||_2 / 7 on normalized outputs plus
/// lambda times the batch mean of ReLU(-cumulative work), summed over steps.
LossBreakdown loss_total(const SurrogateModel& model, std::span<const Sequence* const> batch, double lambda,
                         Forcing forcing = Forcing::teacher);

struct Gradients {
  SurrogateModel grad;  // same layout as the model
  LossBreakdown loss;
};

/// Reverse-mode gradient of loss_total with teacher-forced look-back inputs
/// held constant. Throws TrainingError naming the first non-finite entry.
Gradients bptt_gradients(const SurrogateModel& model, std::span<const Sequence* const> batch, double lambda);

}  // namespace pcrnn::surrogate
