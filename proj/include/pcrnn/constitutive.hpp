#pragma once

// Small-strain J2 elasto-plasticity with piecewise-linear isotropic hardening
// and isotropic continuum damage.
//
// Two damage laws live here:
//  * the micro law, driven by the equivalent plastic displacement and the
//    fracture energy (used at RVE integration points), and
//  * the macro law, a closed-form function of the equivalent plastic strain
//    (used by mono-scale macro elements, optionally non-locally averaged).

#include <span>
#include <utility>
#include <vector>

#include "pcrnn/voigt.hpp"

namespace pcrnn::constitutive {

/// Piecewise-linear yield stress (MPa) versus equivalent plastic strain.
class HardeningCurve {
 public:
  HardeningCurve() = default;
  explicit HardeningCurve(std::vector<std::pair<double, double>> breakpoints);

  /// Yield stress at `eq_plastic`; beyond the last breakpoint the final slope continues.
  double yield_stress(double eq_plastic) const;
  /// Hardening modulus dS_y/dE^pl of the segment containing `eq_plastic`.
  double slope(double eq_plastic) const;
  double initial_yield() const { return points_.front().second; }
  const std::vector<std::pair<double, double>>& breakpoints() const { return points_; }

 private:
  std::size_t segment(double eq_plastic) const;
  std::vector<std::pair<double, double>> points_;
};

struct MaterialModel {
  double elastic_modulus = 5.7e4;  // MPa
  double poisson_ratio = 0.33;
  HardeningCurve hardening;
  double damage_init_strain = 0.05;  // equivalent plastic strain at damage onset
  double alpha = 1.0;                // macro damage evolution rate
  double fracture_energy = 1.92e4;   // N/m
  double fracture_strain = 0.067;
  double char_length = 4.5e-3;  // m

  double shear_modulus() const { return elastic_modulus / (2.0 * (1.0 + poisson_ratio)); }
  double bulk_modulus() const { return elastic_modulus / (3.0 * (1.0 - 2.0 * poisson_ratio)); }

  /// Throws ParameterError when a field violates its physical range.
  void validate() const;
};

/// Synthetic A356-like material: E = 5.7e4 MPa, nu = 0.33, four-breakpoint curve from 170 MPa.
MaterialModel default_material();

/// History variables of one integration point.
struct PointState {
  Vec6 plastic_strain = Vec6::Zero();
  double eq_plastic_strain = 0.0;
  Vec6 prev_plastic_increment = Vec6::Zero();
  double prev_eq_plastic_increment = 0.0;  // plastic multiplier increment of the last step
  double prev_dt = 1.0;
  double damage = 0.0;
  double plastic_displacement = 0.0;  // m, accumulated after damage onset
  double dissipated_energy = 0.0;     // N/m
  Vec6 stress = Vec6::Zero();         // last implicit (damaged) stress
};

/// Per-point switches for the micro damage law.
struct DamageSettings {
  bool enabled = true;
  double char_length = 0.0;  // m; 0 selects MaterialModel::char_length
};

struct Response {
  Vec6 stress = Vec6::Zero();            // damaged stress S = (1-D) S0
  Vec6 reference_stress = Vec6::Zero();  // S0
  Mat6 tangent = Mat6::Zero();
  PointState state;
  bool plastic = false;
  int iterations = 0;
};

/// Isotropic elasticity in Voigt form (engineering shear columns).
Mat6 elastic_stiffness(const MaterialModel& material);

/// Backward-Euler radial return from a converged state.
///
/// The returned tangent is the consistent elasto-plastic tangent scaled by
/// (1 - D); the damage derivative is not included.
Response return_map_implicit(const Vec6& strain, const PointState& state,
                             const MaterialModel& material, const DamageSettings& damage = {});

/// Radial-return iteration limit and absolute tolerance on the yield residual (MPa).
inline constexpr int kReturnMapMaxIterations = 64;
inline constexpr double kReturnMapTolerance = 1e-10;

struct HybridResult {
  Vec6 explicit_stress = Vec6::Zero();
  Vec6 explicit_reference_stress = Vec6::Zero();
  Vec6 extrapolated_plastic_increment = Vec6::Zero();
  double explicit_damage = 0.0;
  Mat6 tangent = Mat6::Zero();
  bool loading = false;
  Response implicit;  // backward-Euler update; implicit.state is the state to carry forward
};

/// Explicit half of the hybrid step only (no implicit update).
HybridResult hybrid_predict(const Vec6& strain_next, double dt_next, const PointState& state,
                            const MaterialModel& material, const DamageSettings& damage = {});

/// Implicit-explicit step: explicit stress and tangent from extrapolated
/// internal variables, plus the implicit update that seeds the next step.
HybridResult hybrid_step(const Vec6& strain_next, double dt_next, const PointState& state,
                         const MaterialModel& material, const DamageSettings& damage = {});

/// Closed-form macro damage as a function of the equivalent plastic strain.
double macro_damage(double eq_plastic, const MaterialModel& material);

/// Fracture-energy damage update for a plastic displacement increment (m) at
/// yield stress `yield_stress` (MPa). Energy is accumulated in N/m.
PointState micro_damage_update(const PointState& state, double d_plastic_disp, double yield_stress,
                               const MaterialModel& material);

/// Discrete cumulative work sum_t S_t : (E_t - E_{t-1}).
double energy_audit(std::span<const Vec6> stress_history, std::span<const Vec6> strain_history);

/// Implicit damage tangent with the softening correction term. Diagnostic only;
/// solvers never assemble it.
Mat6 softening_tangent(const Vec6& reference_stress, double damage, double eq_stress,
                       double softening_modulus, double eq_plastic, const MaterialModel& material);

}  // namespace pcrnn::constitutive
