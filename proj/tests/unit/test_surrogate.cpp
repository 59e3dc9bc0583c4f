#include <random>

#include "doctest.h"
#include "../support/fixtures.hpp"
#include "pcrnn/error.hpp"
#include "pcrnn/surrogate/loss.hpp"
#include "pcrnn/surrogate/model.hpp"
#include "pcrnn/surrogate/training.hpp"

using namespace pcrnn::surrogate;

namespace {

std::vector<const Sequence*> pointers(const std::vector<Sequence>& v) {
  std::vector<const Sequence*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

SurrogateModel small_model(CellType cell, OutputMode mode, int layers, int hidden, int T, int look_back,
                           std::uint64_t seed) {
  Architecture a;
  a.cell = cell;
  a.output = mode;
  a.layers = layers;
  a.hidden = hidden;
  a.head_hidden = hidden;
  a.look_back = look_back;
  SurrogateModel m = init_model(a, T, seed);
  fixtures::rough_normalization(m);
  // Nonzero biases so every parameter receives a gradient.
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> z(0.0, 0.3);
  for (Matrix* p : m.parameters())
    for (Eigen::Index i = 0; i < p->size(); ++i) p->data()[i] += 0.1 * z(rng);
  return m;
}

}  // namespace

TEST_CASE("gru cell with zero parameters halves the previous state") {
  GruLayer p;
  p.W_hr = p.W_hu = p.W_hc = Matrix::Zero(3, 3);
  p.W_xr = p.W_xu = p.W_xc = Matrix::Zero(3, 2);
  p.b_r = p.b_u = p.b_c = p.b_h = Matrix::Zero(3, 1);
  Matrix h(3, 1), x(2, 1);
  h << 1.0, -2.0, 0.5;
  x << 3.0, 4.0;
  CHECK((gru_cell_forward(p, x, h) - 0.5 * h).norm() == 0.0);
  CHECK_THROWS_AS(gru_cell_forward(p, Matrix::Zero(3, 1), h), pcrnn::ParameterError);
}

TEST_CASE("gru cell with a saturated update gate keeps the state") {
  GruLayer p;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  auto rnd = [&](int r, int c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
  };
  p.W_hr = rnd(4, 4), p.W_hc = rnd(4, 4), p.W_xr = rnd(4, 3), p.W_xc = rnd(4, 3);
  p.b_r = rnd(4, 1), p.b_c = rnd(4, 1), p.b_h = Matrix::Zero(4, 1);
  p.W_hu = Matrix::Zero(4, 4), p.W_xu = Matrix::Zero(4, 3), p.b_u = Matrix::Constant(4, 1, 800.0);
  const Matrix h = rnd(4, 1);
  CHECK((gru_cell_forward(p, rnd(3, 1), h) - h).norm() == 0.0);
}

TEST_CASE("gru cell matches an elementwise reference") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  auto rnd = [&](int r, int c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
  };
  GruLayer p{rnd(4, 4), rnd(4, 4), rnd(4, 1), rnd(4, 4), rnd(4, 4), rnd(4, 1),
             rnd(4, 4), rnd(4, 4), rnd(4, 1), rnd(4, 1)};
  const Matrix x = rnd(4, 1), h = rnd(4, 1);
  const Matrix got = gru_cell_forward(p, x, h);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int i = 0; i < 4; ++i) {
    double ar = p.b_r(i), au = p.b_u(i), m = 0.0, ac = p.b_c(i);
    for (int j = 0; j < 4; ++j) {
      ar += p.W_hr(i, j) * h(j) + p.W_xr(i, j) * x(j);
      au += p.W_hu(i, j) * h(j) + p.W_xu(i, j) * x(j);
      m += p.W_hc(i, j) * h(j);
      ac += p.W_xc(i, j) * x(j);
    }
    const double r = sig(ar), u = sig(au);
    const double c = std::tanh(ac + r * m);
    CHECK(got(i) == doctest::Approx(u * h(i) + (1 - u) * c + p.b_h(i)).epsilon(1e-12));
  }
}

TEST_CASE("zero model predicts constant half damage and zero stress") {
  Architecture a;
  a.layers = 2;
  a.hidden = 3;
  a.head_hidden = 3;
  SurrogateModel m = init_model(a, 6, 1);
  for (Matrix* p : m.parameters()) p->setZero();
  const auto seq = fixtures::random_sequences(1, 6, 2);
  const SequenceOutput out = forward_sequence(m, seq[0].strain);
  for (int t = 0; t < 6; ++t) {
    CHECK(out.raw_damage(t) == 0.5);
    CHECK(out.damage(t) == 0.5);
    CHECK(out.stress.row(t).norm() == 0.0);
  }
}

TEST_CASE("look-back widens the input") {
  Architecture a;
  a.look_back = 1;
  CHECK(init_model(a, 5, 0).input_width() == 13);
  a.look_back = 0;
  CHECK(init_model(a, 5, 0).input_width() == 6);
}

TEST_CASE("forward_sequence is repeatable and rejects wrong lengths") {
  const SurrogateModel m = small_model(CellType::gru, OutputMode::constrained, 2, 4, 7, 1, 5);
  const auto seq = fixtures::random_sequences(1, 7, 6);
  const SequenceOutput a = forward_sequence(m, seq[0].strain);
  const SequenceOutput b = forward_sequence(m, seq[0].strain);
  CHECK(a.stress == b.stress);
  CHECK(a.damage == b.damage);
  const PathMatrix short_path = seq[0].strain.topRows(5);
  CHECK_THROWS_AS(forward_sequence(m, short_path), pcrnn::ParameterError);
}

TEST_CASE("stepwise advance reproduces the sequence pass exactly") {
  const SurrogateModel m = small_model(CellType::gru, OutputMode::constrained, 2, 4, 7, 2, 8);
  const auto seq = fixtures::random_sequences(1, 7, 9);
  const SequenceOutput full = forward_sequence(m, seq[0].strain);
  StepState s = initial_step_state(m);
  for (int t = 0; t < 7; ++t) {
    StepState next;
    const StepOutput o = advance(m, s, seq[0].strain.row(t).transpose(), next);
    CHECK(o.stress.transpose() == full.stress.row(t));
    CHECK(o.damage == full.damage(t));
    s = next;
  }
  StepState next;
  CHECK_THROWS_AS(advance(m, s, pcrnn::Vec6::Zero(), next), pcrnn::CapacityError);
}

TEST_CASE("monotone correction examples") {
  const std::vector<double> rising{0.1, 0.2, 0.2, 0.7};
  CHECK(monotone_correct(rising) == rising);
  const std::vector<double> raw{0.0, 0.2, 0.1, 0.3};
  const auto got = monotone_correct(raw);
  CHECK(got[0] == 0.0);
  CHECK(got[1] == doctest::Approx(0.2));
  CHECK(got[2] == doctest::Approx(0.2));
  CHECK(got[3] == doctest::Approx(0.4));
  for (double v : monotone_correct(std::vector<double>{0.9, 0.7, 0.4, 0.1})) CHECK(v == 0.9);
}

TEST_CASE("work penalty examples") {
  PathMatrix E(4, 6), S(4, 6);
  for (int t = 0; t < 4; ++t) {
    E.row(t).setConstant(0.001 * t);
    S.row(t).setConstant(10.0 * t);
  }
  CHECK(work_penalty(std::vector<PathMatrix>{S}, std::vector<PathMatrix>{E}) == 0.0);
  CHECK(work_penalty(std::vector<PathMatrix>{PathMatrix::Zero(4, 6)}, std::vector<PathMatrix>{E}) == 0.0);
  // S_t = -c dE_t gives c times the summed squared increments.
  const double c = 3.0;
  PathMatrix opp(4, 6);
  double expected = 0.0;
  for (int t = 0; t < 4; ++t) {
    const Eigen::RowVectorXd dE = t == 0 ? Eigen::RowVectorXd(E.row(0)) : Eigen::RowVectorXd(E.row(t) - E.row(t - 1));
    opp.row(t) = -c * dE;
    expected += c * dE.squaredNorm();
  }
  CHECK(work_penalty(std::vector<PathMatrix>{opp}, std::vector<PathMatrix>{E}) == doctest::Approx(expected));
}

TEST_CASE("loss decomposition and penalty monotonicity") {
  SurrogateModel m = small_model(CellType::gru, OutputMode::constrained, 1, 3, 6, 0, 21);
  auto data = fixtures::random_sequences(3, 6, 22);
  // Flip the truth so the model's stress opposes the loading somewhere.
  for (Matrix* p : m.parameters()) *p *= 3.0;
  const auto batch = pointers(data);
  const LossBreakdown off = loss_total(m, batch, 0.0);
  double sum = 0.0;
  for (double v : off.data_t) sum += v;
  CHECK(off.total == doctest::Approx(sum).epsilon(1e-14));
  const LossBreakdown on = loss_total(m, batch, 1e-6);
  CHECK(on.data == off.data);
  if (on.penalty > 0.0) CHECK(on.total > off.total);
  CHECK_THROWS_AS(loss_total(m, batch, -1.0), pcrnn::ParameterError);
}

TEST_CASE("perfect predictions give zero loss and zero gradients") {
  SurrogateModel m = small_model(CellType::gru, OutputMode::constrained, 2, 3, 5, 0, 31);
  auto data = fixtures::random_sequences(2, 5, 32);
  for (auto& s : data) {
    const SequenceOutput o = forward_sequence(m, s.strain);
    s.stress = o.stress;
    s.damage = o.damage;
  }
  const Gradients g = bptt_gradients(m, pointers(data), 0.0);
  CHECK(g.loss.total <= 1e-12);
  for (const Matrix* p : g.grad.parameters()) CHECK(p->norm() <= 1e-10);
}

TEST_CASE("bptt matches central differences") {
  struct Case {
    CellType cell;
    OutputMode mode;
    int look_back;
    double lambda;
  };
  for (const Case c : {Case{CellType::gru, OutputMode::constrained, 0, 0.0},
                       Case{CellType::gru, OutputMode::constrained, 1, 1e-3},
                       Case{CellType::gru, OutputMode::direct, 0, 1e-3},
                       Case{CellType::rnn, OutputMode::direct, 1, 0.0}}) {
    const SurrogateModel m = small_model(c.cell, c.mode, 2, 2, 3, c.look_back, 41);
    const auto data = fixtures::random_sequences(2, 3, 42);
    const auto batch = pointers(data);
    const Gradients g = bptt_gradients(m, batch, c.lambda);
    const double err = fixtures::max_gradient_error(
        m, g.grad, [&](const SurrogateModel& mm) { return loss_total(mm, batch, c.lambda).total; }, 1e-5);
    INFO("case look_back=" << c.look_back << " lambda=" << c.lambda);
    CHECK(err <= 1e-5);
  }
}

TEST_CASE("penalty gradients vanish where the work stays positive") {
  const SurrogateModel m = small_model(CellType::gru, OutputMode::constrained, 1, 3, 4, 0, 51);
  auto data = fixtures::random_sequences(2, 4, 52);
  const auto batch = pointers(data);
  const Gradients off = bptt_gradients(m, batch, 0.0);
  const Gradients on = bptt_gradients(m, batch, 1.0);
  const bool active = on.loss.penalty > 0.0;
  double diff = 0.0;
  const auto a = off.grad.parameters(), b = on.grad.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) diff += (*a[i] - *b[i]).norm();
  if (active) CHECK(diff > 0.0);
  else CHECK(diff == 0.0);
}

TEST_CASE("training is deterministic and memorizes a tiny set") {
  Architecture a;
  a.layers = 1;
  a.hidden = 16;
  a.head_hidden = 16;
  const auto data = fixtures::random_sequences(8, 6, 61);
  TrainingConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 30;
  cfg.learning_rate = 1e-2;
  cfg.seed = 4;
  const auto r1 = train(init_model(a, 6, 1), data, cfg);
  const auto r2 = train(init_model(a, 6, 1), data, cfg);
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
  CHECK(r1.history.back().train_loss < r1.history.front().train_loss);
}

TEST_CASE("evaluate_mse on a constructed error") {
  Architecture a;
  a.layers = 1;
  a.hidden = 2;
  a.head_hidden = 2;
  SurrogateModel m = init_model(a, 1, 0);
  for (Matrix* p : m.parameters()) p->setZero();
  // Zero model at one step: damage 0.5, stress 0. Truth: stress e, damage 0.5.
  Sequence s;
  s.strain = PathMatrix::Zero(1, 6);
  s.stress = PathMatrix::Constant(1, 6, 0.25);
  s.damage = Eigen::VectorXd::Constant(1, 0.5);
  const MseReport r = evaluate_mse(m, {s});
  CHECK(r.mse_s == doctest::Approx(0.0625));
  CHECK(r.mse_d == 0.0);
  CHECK(r.mse == doctest::Approx(6 * 0.0625 / 7));
  CHECK_THROWS_AS(evaluate_mse(m, {}), pcrnn::ParameterError);
}
