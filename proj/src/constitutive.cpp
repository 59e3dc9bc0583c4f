#include "pcrnn/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pcrnn/error.hpp"

namespace pcrnn::constitutive {

namespace {

// MPa * m -> N/m
constexpr double kStressLengthToEnergy = 1e6;

// Fraction of the fracture energy past which a point is considered fully broken.
constexpr double kFullDamageEnergyFraction = 0.99;

double effective_char_length(const MaterialModel& material, const DamageSettings& damage) {
  return damage.char_length > 0.0 ? damage.char_length : material.char_length;
}

// Plastic displacement accumulated when the equivalent plastic strain moves
// from `from` to `to`; only the portion past damage onset counts.
double post_onset_displacement(double from, double to, double onset, double char_length) {
  if (to <= onset) return 0.0;
  return char_length * (to - std::max(from, onset));
}

}  // namespace

HardeningCurve::HardeningCurve(std::vector<std::pair<double, double>> breakpoints)
    : points_(std::move(breakpoints)) {
  if (points_.empty()) throw ParameterError("hardening curve needs at least one breakpoint");
  if (points_.front().first != 0.0)
    throw ParameterError("first hardening breakpoint must sit at zero plastic strain");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i].second > 0.0)) throw ParameterError("yield stresses must be positive");
    if (i > 0 && !(points_[i].first > points_[i - 1].first))
      throw ParameterError("hardening breakpoints must be strictly increasing");
  }
}

std::size_t HardeningCurve::segment(double eq_plastic) const {
  // Index i of the segment [p_i, p_{i+1}]; the last segment extends to infinity.
  if (points_.size() < 2) return 0;
  auto it = std::upper_bound(points_.begin(), points_.end(), eq_plastic,
                             [](double v, const auto& p) { return v < p.first; });
  std::size_t idx = it == points_.begin() ? 0 : static_cast<std::size_t>(it - points_.begin()) - 1;
  return std::min(idx, points_.size() - 2);
}

double HardeningCurve::slope(double eq_plastic) const {
  if (points_.size() < 2) return 0.0;
  const std::size_t i = segment(eq_plastic);
  return (points_[i + 1].second - points_[i].second) / (points_[i + 1].first - points_[i].first);
}

double HardeningCurve::yield_stress(double eq_plastic) const {
  if (points_.size() < 2) return points_.front().second;
  const std::size_t i = segment(eq_plastic);
  return points_[i].second + slope(eq_plastic) * (eq_plastic - points_[i].first);
}

void MaterialModel::validate() const {
  if (!(elastic_modulus > 0.0)) throw ParameterError("elastic modulus must be positive");
  if (!(poisson_ratio > 0.0 && poisson_ratio < 0.5))
    throw ParameterError("Poisson ratio must lie in (0, 0.5)");
  if (hardening.breakpoints().empty()) throw ParameterError("hardening curve is empty");
  if (!(alpha >= 0.0)) throw ParameterError("damage evolution rate must be non-negative");
  if (!(fracture_energy > 0.0)) throw ParameterError("fracture energy must be positive");
  if (!(damage_init_strain >= 0.0)) throw ParameterError("damage onset strain must be non-negative");
  if (!(char_length > 0.0)) throw ParameterError("characteristic length must be positive");
}

MaterialModel default_material() {
  MaterialModel m;
  // Synthetic curve, not digitized from measured data.
  m.hardening = HardeningCurve({{0.0, 170.0}, {0.01, 215.0}, {0.04, 250.0}, {0.10, 275.0}});
  return m;
}

Mat6 elastic_stiffness(const MaterialModel& material) {
  const double E = material.elastic_modulus;
  const double nu = material.poisson_ratio;
  if (!(E > 0.0)) throw ParameterError("elastic modulus must be positive");
  if (!(nu > -1.0 && nu < 0.5)) throw ParameterError("Poisson ratio outside (-1, 0.5)");
  const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = E / (2.0 * (1.0 + nu));
  Mat6 C = Mat6::Zero();
  C.topLeftCorner<3, 3>().setConstant(lambda);
  for (int i = 0; i < 3; ++i) {
    C(i, i) = lambda + 2.0 * mu;
    C(i + 3, i + 3) = mu;
  }
  return C;
}

PointState micro_damage_update(const PointState& state, double d_plastic_disp, double yield_stress,
                               const MaterialModel& material) {
  if (d_plastic_disp < 0.0)
    throw ParameterError("plastic displacement increment must be non-negative");
  if (d_plastic_disp == 0.0) return state;
  PointState next = state;
  next.plastic_displacement += d_plastic_disp;
  next.dissipated_energy += yield_stress * kStressLengthToEnergy * d_plastic_disp;
  double d = 1.0 - std::exp(-next.dissipated_energy / material.fracture_energy);
  if (next.dissipated_energy > kFullDamageEnergyFraction * material.fracture_energy) d = 1.0;
  next.damage = std::max(state.damage, d);
  return next;
}

double macro_damage(double eq_plastic, const MaterialModel& material) {
  const double onset = material.damage_init_strain;
  if (eq_plastic <= onset) return 0.0;
  return 1.0 - (onset / eq_plastic) * std::exp(-material.alpha * (eq_plastic - onset));
}

Response return_map_implicit(const Vec6& strain, const PointState& state,
                             const MaterialModel& material, const DamageSettings& damage) {
  const Mat6 C = elastic_stiffness(material);
  const double G = material.shear_modulus();
  const HardeningCurve& curve = material.hardening;

  Response out;
  out.state = state;
  const Vec6 trial = C * (strain - state.plastic_strain);
  const Vec6 s = voigt::deviator(trial);
  const double s_norm = std::sqrt(voigt::stress_norm_sq(s));
  const double q = std::sqrt(1.5) * s_norm;
  const double eqp = state.eq_plastic_strain;

  Vec6 reference = trial;
  Mat6 tangent = C;
  Vec6 d_plastic = Vec6::Zero();
  double d_gamma = 0.0;

  if (q - curve.yield_stress(eqp) > kReturnMapTolerance) {
    // The absolute tolerance sits below double resolution once q is large
    // (heavily strained damaged points), so it is floored at a few ulps of q.
    const double tol = std::max(kReturnMapTolerance, 8.0 * std::numeric_limits<double>::epsilon() * q);
    double residual = 0.0;
    bool converged = false;
    for (int it = 0; it < kReturnMapMaxIterations; ++it) {
      residual = q - 3.0 * G * d_gamma - curve.yield_stress(eqp + d_gamma);
      out.iterations = it + 1;
      if (std::abs(residual) <= tol) {
        converged = true;
        break;
      }
      d_gamma += residual / (3.0 * G + curve.slope(eqp + d_gamma));
    }
    if (!converged) throw IntegrationError("radial return did not converge", residual);

    const Vec6 flow = s / q;  // tensor components
    reference = trial - 3.0 * G * d_gamma * flow;
    d_plastic = 1.5 * d_gamma * flow;
    d_plastic.tail<3>() *= 2.0;  // engineering shear

    // Consistent tangent: K 1x1 + 2G (1 - 3G dg / q) I_dev + 6G^2 (dg/q - 1/(3G+H)) N x N
    const double H = curve.slope(eqp + d_gamma);
    const Vec6 N = s / s_norm;
    Mat6 I_dev = Mat6::Zero();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) I_dev(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / 3.0;
      I_dev(i + 3, i + 3) = 0.5;
    }
    Mat6 vol = Mat6::Zero();
    vol.topLeftCorner<3, 3>().setConstant(material.bulk_modulus());
    tangent = vol + 2.0 * G * (1.0 - 3.0 * G * d_gamma / q) * I_dev +
              6.0 * G * G * (d_gamma / q - 1.0 / (3.0 * G + H)) * (N * N.transpose());
    out.plastic = true;
  }

  PointState& next = out.state;
  next.plastic_strain = state.plastic_strain + d_plastic;
  next.eq_plastic_strain = eqp + d_gamma;
  next.prev_plastic_increment = d_plastic;
  next.prev_eq_plastic_increment = d_gamma;

  if (damage.enabled && d_gamma > 0.0) {
    const double du = post_onset_displacement(eqp, next.eq_plastic_strain, material.damage_init_strain,
                                              effective_char_length(material, damage));
    next = micro_damage_update(next, du, curve.yield_stress(next.eq_plastic_strain), material);
  }

  const double keep = 1.0 - next.damage;
  out.reference_stress = reference;
  out.stress = keep * reference;
  out.tangent = keep * tangent;
  next.stress = out.stress;
  return out;
}

HybridResult hybrid_predict(const Vec6& strain_next, double dt_next, const PointState& state,
                            const MaterialModel& material, const DamageSettings& damage) {
  if (!(state.prev_dt > 0.0)) throw ParameterError("previous time step must be positive");
  if (!(dt_next > 0.0)) throw ParameterError("time step must be positive");
  const Mat6 C = elastic_stiffness(material);
  const double ratio = dt_next / state.prev_dt;

  HybridResult out;
  out.extrapolated_plastic_increment = ratio * state.prev_plastic_increment;
  const double d_lambda = ratio * state.prev_eq_plastic_increment;

  out.explicit_reference_stress =
      C * (strain_next - state.plastic_strain - out.extrapolated_plastic_increment);

  double damage_tilde = state.damage;
  if (damage.enabled && d_lambda > 0.0) {
    const double eqp_tilde = state.eq_plastic_strain + d_lambda;
    const double du = post_onset_displacement(state.eq_plastic_strain, eqp_tilde,
                                              material.damage_init_strain,
                                              effective_char_length(material, damage));
    damage_tilde =
        micro_damage_update(state, du, material.hardening.yield_stress(eqp_tilde), material).damage;
  }
  out.explicit_damage = damage_tilde;

  const Vec6 trial = C * (strain_next - state.plastic_strain);
  out.loading = voigt::von_mises(trial) - material.hardening.yield_stress(state.eq_plastic_strain) >= 0.0;

  const double keep = 1.0 - damage_tilde;
  out.explicit_stress = keep * out.explicit_reference_stress;
  out.tangent = keep * C;
  return out;
}

HybridResult hybrid_step(const Vec6& strain_next, double dt_next, const PointState& state,
                         const MaterialModel& material, const DamageSettings& damage) {
  HybridResult out = hybrid_predict(strain_next, dt_next, state, material, damage);
  out.implicit = return_map_implicit(strain_next, state, material, damage);
  out.implicit.state.prev_dt = dt_next;
  return out;
}

double energy_audit(std::span<const Vec6> stress_history, std::span<const Vec6> strain_history) {
  if (stress_history.size() != strain_history.size())
    throw ParameterError("stress and strain histories differ in length");
  if (stress_history.size() < 2) throw ParameterError("energy audit needs at least two steps");
  double w = 0.0;
  for (std::size_t t = 1; t < stress_history.size(); ++t)
    w += voigt::work(stress_history[t], strain_history[t] - strain_history[t - 1]);
  return w;
}

Mat6 softening_tangent(const Vec6& reference_stress, double damage, double eq_stress,
                       double softening_modulus, double eq_plastic, const MaterialModel& material) {
  if (!(eq_plastic > 0.0)) throw ParameterError("softening tangent needs positive plastic strain");
  const double coeff = (eq_stress - softening_modulus * eq_plastic) / std::pow(eq_plastic, 3);
  return (1.0 - damage) * elastic_stiffness(material) -
         coeff * (reference_stress * reference_stress.transpose());
}

}  // namespace pcrnn::constitutive
