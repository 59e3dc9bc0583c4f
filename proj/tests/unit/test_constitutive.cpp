#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "pcrnn/constitutive.hpp"
#include "pcrnn/error.hpp"

using namespace pcrnn;
using namespace pcrnn::constitutive;

namespace {

MaterialModel linear_hardening() {
  MaterialModel m = default_material();
  m.hardening = HardeningCurve({{0.0, 200.0}, {1.0, 1200.0}});
  return m;
}

Vec6 uniaxial_strain(double e) {
  Vec6 v = Vec6::Zero();
  v(0) = e;
  return v;
}

}  // namespace

TEST_CASE("elastic stiffness entries and definiteness") {
  MaterialModel m = default_material();
  const Mat6 C = elastic_stiffness(m);
  const double E = 5.7e4, nu = 0.33;
  CHECK(C(0, 0) == doctest::Approx(E * (1 - nu) / ((1 + nu) * (1 - 2 * nu))).epsilon(1e-12));
  CHECK(C(0, 0) == doctest::Approx(8.4454e4).epsilon(1e-4));
  CHECK(C(3, 3) == doctest::Approx(E / (2 * (1 + nu))).epsilon(1e-12));
  Eigen::SelfAdjointEigenSolver<Mat6> eig(C);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);

  m.poisson_ratio = 0.0;
  const Mat6 C0 = elastic_stiffness(m);
  CHECK(C0(0, 0) == doctest::Approx(m.elastic_modulus));
  CHECK(C0(0, 1) == 0.0);
  CHECK(C0(1, 2) == 0.0);

  m.poisson_ratio = 0.5;
  CHECK_THROWS_AS(elastic_stiffness(m), ParameterError);
}

TEST_CASE("hardening curve interpolates and extends the last slope") {
  const HardeningCurve h({{0.0, 100.0}, {0.1, 200.0}, {0.2, 250.0}});
  CHECK(h.yield_stress(0.05) == doctest::Approx(150.0));
  CHECK(h.yield_stress(0.3) == doctest::Approx(300.0));
  CHECK(h.slope(0.15) == doctest::Approx(500.0));
  CHECK_THROWS_AS(HardeningCurve({{0.1, 100.0}}), ParameterError);
}

TEST_CASE("return map: elastic branch and zero strain") {
  const MaterialModel m = default_material();
  const Mat6 C = elastic_stiffness(m);
  const Vec6 eps = uniaxial_strain(1e-3);
  const Response r = return_map_implicit(eps, PointState{}, m);
  CHECK_FALSE(r.plastic);
  CHECK((r.stress - C * eps).norm() <= 1e-12 * (C * eps).norm());
  CHECK(r.state.plastic_strain.isZero());

  const Response z = return_map_implicit(Vec6::Zero(), PointState{}, m);
  CHECK(z.stress.isZero());
  CHECK((z.tangent - C).norm() == 0.0);
}

TEST_CASE("return map: consistency on the yield surface and plastic incompressibility") {
  const MaterialModel m = linear_hardening();
  Vec6 eps;
  eps << 0.02, -0.004, -0.003, 0.01, 0.0, 0.005;
  DamageSettings off{false};
  const Response r = return_map_implicit(eps, PointState{}, m, off);
  CHECK(r.plastic);
  const double q = std::sqrt(1.5 * voigt::stress_norm_sq(voigt::deviator(r.stress)));
  CHECK(std::abs(q - m.hardening.yield_stress(r.state.eq_plastic_strain)) <= 1e-8 * m.hardening.initial_yield());
  CHECK(std::abs(r.state.plastic_strain.head<3>().sum()) <= 1e-14);
}

TEST_CASE("return map: uniaxial stress ramp against a dense substep oracle") {
  // One-dimensional linear hardening, integrated with many explicit substeps.
  const MaterialModel m = linear_hardening();
  const double E = m.elastic_modulus, H = 1000.0, sy0 = 200.0;
  const Mat6 C = elastic_stiffness(m);
  DamageSettings off{false};

  // Mixed control: drive E11, keep the other stresses zero via a lateral Newton loop.
  auto uniaxial_stress = [&](double e11, const PointState& s) {
    Vec6 eps = uniaxial_strain(e11);
    Response r;
    for (int it = 0; it < 50; ++it) {
      r = return_map_implicit(eps, s, m, off);
      Eigen::Matrix<double, 5, 1> res = r.stress.tail<5>();
      if (res.norm() < 1e-9) break;
      const Eigen::Matrix<double, 5, 5> K = r.tangent.bottomRightCorner<5, 5>();
      eps.tail<5>() -= K.lu().solve(res);
    }
    return r;
  };

  PointState s;
  double sig_oracle = 0.0, ep = 0.0;
  const int steps = 20, sub = 1000;
  double max_rel = 0.0;
  for (int n = 1; n <= steps; ++n) {
    const double e = 0.004 * n;
    const Response r = uniaxial_stress(e, s);
    s = r.state;
    for (int k = 1; k <= sub; ++k) {
      const double de = 0.004 / sub;
      const double trial = sig_oracle + E * de;
      const double f = std::abs(trial) - (sy0 + H * ep);
      if (f > 0.0) {
        const double dl = f / (E + H);
        ep += dl;
        sig_oracle = trial - E * dl * (trial > 0 ? 1.0 : -1.0);
      } else {
        sig_oracle = trial;
      }
    }
    max_rel = std::max(max_rel, std::abs(r.stress(0) - sig_oracle) / std::abs(sig_oracle));
  }
  CHECK(max_rel <= 1e-6);
  (void)C;
}

TEST_CASE("hybrid step examples") {
  const MaterialModel m = linear_hardening();
  const Mat6 C = elastic_stiffness(m);
  DamageSettings off{false};

  const Vec6 eps = uniaxial_strain(0.01);
  const HybridResult v = hybrid_predict(eps, 1.0, PointState{}, m, off);
  CHECK((v.explicit_stress - C * eps).norm() <= 1e-12 * (C * eps).norm());
  CHECK((v.tangent - C).norm() == 0.0);

  PointState s;
  s.prev_plastic_increment << 1e-3, -5e-4, -5e-4, 2e-4, 0, 0;
  s.prev_eq_plastic_increment = 1.2e-3;
  s.prev_dt = 0.7;
  const HybridResult same = hybrid_predict(eps, 0.7, s, m, off);
  CHECK(same.extrapolated_plastic_increment == s.prev_plastic_increment);
  const HybridResult twice = hybrid_predict(eps, 1.4, s, m, off);
  CHECK((twice.extrapolated_plastic_increment - 2.0 * s.prev_plastic_increment).norm() <= 1e-18);

  PointState dmg;
  dmg.damage = 0.25;
  const HybridResult d = hybrid_predict(Vec6::Zero(), 1.0, dmg, m);
  CHECK(d.explicit_damage == 0.25);
  CHECK(d.tangent == Mat6(0.75 * C));
}

TEST_CASE("macro damage law") {
  MaterialModel m = default_material();
  CHECK(macro_damage(m.damage_init_strain, m) == 0.0);
  CHECK(macro_damage(0.0, m) == 0.0);
  m.alpha = 0.0;
  CHECK(macro_damage(2.0 * m.damage_init_strain, m) == doctest::Approx(0.5).epsilon(1e-14));
  m.alpha = 5.0;
  double prev = 0.0;
  for (double e = 0.06; e < 5.0; e *= 1.3) {
    const double d = macro_damage(e, m);
    CHECK(d >= prev);
    CHECK(d < 1.0);
    prev = d;
  }
  CHECK(prev > 0.99);
}

TEST_CASE("micro damage from dissipated energy") {
  const MaterialModel m = default_material();
  const PointState s;
  const PointState same = micro_damage_update(s, 0.0, 250.0, m);
  CHECK(same.damage == s.damage);
  CHECK(same.dissipated_energy == s.dissipated_energy);

  // S_y [MPa] * 1e6 * u [m] = G_f ln 2 gives D = 1/2.
  const double sy = 250.0;
  const double u = m.fracture_energy * std::log(2.0) / (sy * 1e6);
  CHECK(micro_damage_update(s, u, sy, m).damage == doctest::Approx(0.5).epsilon(1e-12));

  const double u_full = 0.991 * m.fracture_energy / (sy * 1e6);
  CHECK(micro_damage_update(s, u_full, sy, m).damage == 1.0);
  CHECK_THROWS_AS(micro_damage_update(s, -1.0, sy, m), ParameterError);
}

TEST_CASE("energy audit") {
  std::vector<Vec6> zero(5, Vec6::Zero()), strain(5, Vec6::Zero());
  for (int i = 0; i < 5; ++i) strain[static_cast<std::size_t>(i)](0) = 0.001 * i;
  CHECK(energy_audit(zero, strain) == 0.0);

  // Right Riemann sum of a 1D linear ramp: above E e^2 / 2, converging to it.
  const double E = 1000.0, e = 0.01;
  double last_gap = 1e300;
  for (int n : {10, 100, 1000}) {
    std::vector<Vec6> S(static_cast<std::size_t>(n + 1), Vec6::Zero()), Ev = S;
    for (int i = 0; i <= n; ++i) {
      Ev[static_cast<std::size_t>(i)](0) = e * i / n;
      S[static_cast<std::size_t>(i)](0) = E * e * i / n;
    }
    const double w = energy_audit(S, Ev);
    const double gap = w - 0.5 * E * e * e;
    CHECK(gap > 0.0);
    CHECK(gap < last_gap);
    CHECK(gap == doctest::Approx(0.5 * E * e * e / n).epsilon(1e-9));
    last_gap = gap;
  }
}

TEST_CASE("random plastic paths keep the yield residual and damage bounds") {
  const MaterialModel m = default_material();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.004, 0.004);
  for (int path = 0; path < 20; ++path) {
    PointState s;
    Vec6 eps = Vec6::Zero();
    double prev_damage = 0.0;
    for (int t = 0; t < 50; ++t) {
      for (int i = 0; i < 6; ++i) eps(i) += u(rng);
      const Response r = return_map_implicit(eps, s, m);
      CHECK(r.state.damage >= prev_damage);
      CHECK(r.state.damage <= 1.0);
      if (r.plastic) {
        const double q = std::sqrt(1.5 * voigt::stress_norm_sq(voigt::deviator(r.reference_stress)));
        CHECK(std::abs(q - m.hardening.yield_stress(r.state.eq_plastic_strain)) <=
              std::max(1e-8 * m.hardening.initial_yield(), 1e-14 * q));
      }
      prev_damage = r.state.damage;
      s = r.state;
    }
  }
}
