#include <cmath>

#include "doctest.h"
#include "pcrnn/error.hpp"
#include "pcrnn/macro.hpp"

using namespace pcrnn;
using namespace pcrnn::macro;

namespace {

std::vector<double> ramp(int n, double d) {
  std::vector<double> s;
  for (int i = 1; i <= n; ++i) s.push_back(d * i / n);
  return s;
}

}  // namespace

TEST_CASE("bell weights") {
  CHECK(bell_weight(0.0, 2.0) == 1.0);
  CHECK(bell_weight(1.0, 2.0) == 0.0);
  CHECK(bell_weight(1.5, 2.0) == 0.0);
  CHECK(bell_weight(0.5, 2.0) == doctest::Approx(0.5625));
}

TEST_CASE("non-local rows sum to one and preserve uniform fields") {
  const auto m = mesh::structured_box(4, 3, 2, Vec3(4, 3, 2));
  std::vector<Vec3> c;
  std::vector<double> v;
  for (int e = 0; e < m.num_elements(); ++e) {
    const auto g = mesh::tet_geometry(m, e);
    c.push_back(g.centroid);
    v.push_back(g.volume);
  }
  const auto W = nonlocal_weights(c, v, 2.5);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.num_elements());
  CHECK(((W * ones) - ones).cwiseAbs().maxCoeff() <= 1e-12);
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(m.num_elements(), 0.37);
  CHECK((nonlocal_damage(uniform, W) - uniform).cwiseAbs().maxCoeff() <= 1e-15);
  Eigen::VectorXd local = Eigen::VectorXd::LinSpaced(m.num_elements(), 0.0, 1.0);
  const Eigen::VectorXd avg = nonlocal_damage(local, W);
  CHECK(avg.minCoeff() >= 0.0);
  CHECK(avg.maxCoeff() <= 1.0);
  for (int i = 0; i < m.num_elements(); ++i) CHECK(W.coeff(i, i) > 0.0);
}

TEST_CASE("isolated points keep their own damage; two-point average") {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(10, 0, 0)};
  const std::vector<double> vol{1.0, 1.0};
  const auto W = nonlocal_weights(pts, vol, 2.0);
  Eigen::VectorXd D(2);
  D << 0.2, 0.9;
  CHECK(nonlocal_damage(D, W) == D);
  Eigen::SparseMatrix<double, Eigen::RowMajor> half(2, 2);
  half.insert(0, 0) = 0.5, half.insert(0, 1) = 0.5, half.insert(1, 0) = 0.5, half.insert(1, 1) = 0.5;
  D << 0.0, 1.0;
  const Eigen::VectorXd got = nonlocal_damage(D, half);
  CHECK(got(0) == 0.5);
  CHECK(got(1) == 0.5);
}

TEST_CASE("mono elastic cube matches the uniaxial reaction") {
  const double size = 2.0, d = 1e-3;
  MacroProblem p = cube_problem(size, ramp(4, d));
  Models models;
  models.material = constitutive::default_material();
  const MacroResult r = newton_solve(p, models);
  REQUIRE(r.steps.size() == 4);
  for (const auto& s : r.steps) {
    const double analytic = models.material.elastic_modulus * size * size * (s.displacement / size);
    CHECK(std::abs(s.reaction - analytic) <= 1e-8 * analytic);
    CHECK(s.balance <= 1e-6);
  }
  // Linear curve.
  const double k0 = r.steps[0].reaction / r.steps[0].displacement;
  for (const auto& s : r.steps) CHECK(std::abs(s.reaction / s.displacement - k0) <= 1e-6 * k0);
}

TEST_CASE("zero schedule gives zero forces") {
  MacroProblem p = cube_problem(1.0, std::vector<double>(3, 0.0));
  Models models;
  models.material = constitutive::default_material();
  for (const auto& s : newton_solve(p, models).steps) CHECK(s.reaction == 0.0);
}

TEST_CASE("one-element fixture is uniaxial") {
  MacroProblem p = one_element_problem(ramp(3, 1e-3));
  Models models;
  models.material = constitutive::default_material();
  const MacroResult r = newton_solve(p, models);
  const auto& last = r.steps.back();
  CHECK(last.reaction == doctest::Approx(models.material.elastic_modulus * 1e-3 / 6.0).epsilon(1e-9));
  const Vec6 eps = r.frames.back().strain[0];
  CHECK(eps(1) == doctest::Approx(-models.material.poisson_ratio * 1e-3).epsilon(1e-9));
}

TEST_CASE("mono plasticity softens the notched bar with damage") {
  MacroProblem p = notched_bar_problem(0, ramp(30, 0.6));
  p.nonlocal_length = 4.0;
  Models models;
  models.material = constitutive::default_material();
  const MacroResult r = newton_solve(p, models);
  double peak = 0.0;
  for (const auto& s : r.steps) peak = std::max(peak, s.reaction);
  CHECK(r.steps.back().reaction < peak);
  double dmax = 0.0;
  for (double v : r.frames.back().damage) dmax = std::max(dmax, v);
  CHECK(dmax > 0.0);
  CHECK(dmax <= 1.0);
}

TEST_CASE("problem validation") {
  MacroProblem p = cube_problem(1.0, {});
  Models models;
  CHECK_THROWS_AS(newton_solve(p, models), ParameterError);
  p = cube_problem(1.0, {0.1});
  p.driven = "nowhere";
  CHECK_THROWS_AS(newton_solve(p, models), ParameterError);
  p = cube_problem(1.0, {0.1});
  p.set_binding(Binding::surrogate);
  CHECK_THROWS_AS(newton_solve(p, models), ParameterError);
}

TEST_CASE("csv and vtk writers") {
  MacroProblem p = cube_problem(1.0, ramp(2, 1e-4));
  Models models;
  models.material = constitutive::default_material();
  const MacroResult r = newton_solve(p, models);
  const std::string csv = reaction_csv(r);
  CHECK(csv.rfind("step,displacement,reaction", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const std::string vtk = vtk_frame(p.mesh, r.frames[0]);
  CHECK(vtk.find("CELL_TYPES 12") != std::string::npos);
  CHECK(vtk.find("SCALARS damage") != std::string::npos);
}
