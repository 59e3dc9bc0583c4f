#include <cmath>

#include "doctest.h"
#include "pcrnn/error.hpp"
#include "pcrnn/io.hpp"
#include "pcrnn/sampling.hpp"

using namespace pcrnn;
using namespace pcrnn::sampling;

TEST_CASE("kernel values") {
  CHECK(gp_kernel(3.0, 3.0, 0.01, 0.5) == doctest::Approx(0.01));
  CHECK(gp_kernel(0.0, 10.0, 1.0, 0.01) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(gp_kernel(12.0, 2.0, 1.0, 0.01) == gp_kernel(2.0, 12.0, 1.0, 0.01));
}

TEST_CASE("control steps end at the last load step") {
  PathConfig c;
  c.n_load = 101;
  c.n_c = 5;
  const auto steps = c.control_steps();
  REQUIRE(steps.size() == 5);
  CHECK(steps.front() == 21);
  CHECK(steps.back() == 101);
}

TEST_CASE("third normal component closes the trace") {
  PathConfig c;
  c.n_paths = 50;
  for (int i = 0; i < c.n_paths; ++i) {
    const ControlPointSet cp = sample_control_points(c, i);
    for (Eigen::Index r = 0; r < cp.values.rows(); ++r) {
      const double tr = cp.values(r, 0) + cp.values(r, 1) + cp.values(r, 2);
      CHECK(std::abs(tr) <= c.zeta2 + 1e-15);
      CHECK(cp.values.row(r).cwiseAbs().maxCoeff() <= c.zeta1 + 1e-15);
    }
  }
}

TEST_CASE("interpolant passes through its control points and starts at zero") {
  PathConfig c;
  c.n_paths = 20;
  for (int i = 0; i < c.n_paths; ++i) {
    const ControlPointSet cp = sample_control_points(c, i);
    const PathMatrix path = gp_interpolate(cp, c);
    CHECK(path.row(0).isZero(0.0));
    for (std::size_t k = 0; k < cp.steps.size(); ++k)
      CHECK((path.row(cp.steps[k] - 1) - cp.values.row(static_cast<Eigen::Index>(k))).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("single control point is reproduced") {
  PathConfig c;
  c.n_load = 11;
  c.n_c = 1;
  ControlPointSet cp;
  cp.steps = {11};
  cp.values = Eigen::Matrix<double, 1, 6>::Constant(0.03);
  const PathMatrix p = gp_interpolate(cp, c);
  CHECK((p.row(10).array() - 0.03).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("generated paths respect the bounds and are deterministic") {
  PathConfig c;
  c.n_paths = 10;
  c.seed = 99;
  const auto a = generate_paths(c, 1);
  const auto b = generate_paths(c, 3);
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].path_id == static_cast<int>(i));
    CHECK(within_bounds(a[i].steps, c.zeta1, c.zeta2));
    CHECK(a[i].steps.row(0).isZero(0.0));
    CHECK(a[i].steps.rows() == c.n_load);
    CHECK(io::to_json(a[i]).dump() == io::to_json(b[i]).dump());
  }
  const auto again = generate_path(c, 4);
  CHECK(again.steps == a[4].steps);

  c.n_paths = 0;
  CHECK(generate_paths(c).empty());
}

TEST_CASE("latin hypercube engine also honours the bounds") {
  PathConfig c;
  c.n_paths = 12;
  c.engine = Engine::lhs;
  for (const auto& p : generate_paths(c)) CHECK(within_bounds(p.steps, c.zeta1, c.zeta2));
}

TEST_CASE("bounds check and configuration validation") {
  PathMatrix p = PathMatrix::Zero(3, 6);
  CHECK(within_bounds(p, 0.1, 0.04));
  p(1, 0) = 0.11;
  CHECK_FALSE(within_bounds(p, 0.1, 0.04));
  p(1, 0) = 0.03;
  p(1, 1) = 0.03;
  CHECK_FALSE(within_bounds(p, 0.1, 0.04));

  PathConfig c;
  c.n_c = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = PathConfig{};
  c.zeta1 = -1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}
