#pragma once

// Recurrent surrogate for the homogenized response of a strain path.
//
// A stack of recurrent cells (GRU, or a plain tanh cell for the baseline)
// reads normalized strains, optionally augmented with the normalized
// responses of the previous `look_back` steps. In constrained mode two
// feed-forward heads predict the normalized reference stress and a damage
// logit; the squashed damage is made non-decreasing and the damaged stress is
// rebuilt as (1 - D') S0. In direct mode one head predicts all seven
// normalized outputs.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pcrnn/sampling.hpp"
#include "pcrnn/voigt.hpp"

namespace pcrnn::surrogate {

using Matrix = Eigen::MatrixXd;
using sampling::PathMatrix;

inline constexpr int kOutputs = 7;  // six stresses and the damage

enum class CellType { gru, rnn };
enum class OutputMode { constrained, direct };
enum class Activation { tanh, identity };

struct GruLayer {
  Matrix W_hr, W_xr, b_r;  // reset gate
  Matrix W_hu, W_xu, b_u;  // update gate
  Matrix W_hc, W_xc, b_c;  // candidate
  Matrix b_h;              // output bias
};

/// h_t = tanh(W_hh h_{t-1} + W_xh x_t + b_h).
struct RnnLayer {
  Matrix W_hh, W_xh, b_h;
};

struct DenseLayer {
  Matrix W, b;
  Activation activation = Activation::tanh;
};

struct Ffnn {
  std::vector<DenseLayer> layers;
};

struct Architecture {
  CellType cell = CellType::gru;
  OutputMode output = OutputMode::constrained;
  int layers = 2;
  int hidden = 64;
  int head_hidden = 64;
  int head_layers = 1;  // hidden tanh layers per head
  int look_back = 0;    // teacher-forcing look-back steps; 0 disables
};

/// Per-channel affine maps v -> (v - mid) / half.
struct Normalization {
  Eigen::VectorXd strain_mid = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd strain_half = Eigen::VectorXd::Ones(6);
  Eigen::VectorXd out_mid = Eigen::VectorXd::Zero(kOutputs);
  Eigen::VectorXd out_half = Eigen::VectorXd::Ones(kOutputs);
};

struct SurrogateModel {
  Architecture arch;
  int n_load = 101;
  Normalization norm;
  std::vector<GruLayer> gru;
  std::vector<RnnLayer> rnn;
  Ffnn stress_head;  // constrained mode
  Ffnn damage_head;  // constrained mode
  Ffnn output_head;  // direct mode

  int input_width() const { return 6 + kOutputs * arch.look_back; }

  /// Every trainable matrix in a fixed order, with matching names.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;
  /// Same shapes, all zeros (gradient accumulator).
  SurrogateModel zeros_like() const;
};

/// Glorot-uniform input and head weights, orthogonal recurrent weights, zero biases.
SurrogateModel init_model(const Architecture& arch, int n_load, std::uint64_t seed);

/// One GRU step for a batch stored as columns.
Matrix gru_cell_forward(const GruLayer& layer, const Matrix& x, const Matrix& h_prev);
Matrix rnn_cell_forward(const RnnLayer& layer, const Matrix& x, const Matrix& h_prev);

/// Running sum of the non-negative increments of `raw`, clamped to [0, 1].
std::vector<double> monotone_correct(std::span<const double> raw);

/// Ground-truth responses used as look-back inputs during training.
struct Teacher {
  const PathMatrix* stress = nullptr;
  const Eigen::VectorXd* damage = nullptr;
};

struct SequenceOutput {
  PathMatrix reference_stress;  // S0 (constrained mode; equals stress in direct mode)
  PathMatrix stress;
  Eigen::VectorXd raw_damage;   // squashed head output before correction
  Eigen::VectorXd damage;       // corrected
  Eigen::Matrix<double, Eigen::Dynamic, kOutputs> normalized;
  std::vector<Matrix> hidden;   // per layer, n_load x hidden
};

/// Full pass over one strain path. Without a teacher, look-back inputs are
/// the model's own previous normalized predictions.
SequenceOutput forward_sequence(const SurrogateModel& model, const PathMatrix& strain,
                                const Teacher& teacher = {});

/// Recurrent state between steps, for incremental queries.
struct StepState {
  int step = 0;  // steps consumed so far
  std::vector<Eigen::VectorXd> hidden;
  double raw_damage = 0.0;
  double damage = 0.0;
  Eigen::MatrixXd history;  // kOutputs x look_back normalized outputs, newest first
};

struct StepOutput {
  Vec6 reference_stress = Vec6::Zero();
  Vec6 stress = Vec6::Zero();
  double raw_damage = 0.0;
  double damage = 0.0;
  Eigen::Matrix<double, kOutputs, 1> normalized;
};

StepState initial_step_state(const SurrogateModel& model);

/// Consumes one strain; `next` receives the advanced state. forward_sequence
/// is a loop over this function, so the two agree bit for bit.
StepOutput advance(const SurrogateModel& model, const StepState& state, const Vec6& strain, StepState& next);

}  // namespace pcrnn::surrogate
