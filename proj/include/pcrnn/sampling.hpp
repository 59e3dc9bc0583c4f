#pragma once

// Random strain paths: quasi-random control points under magnitude and
// volumetric bounds, joined by a noise-free Gaussian-process mean.

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace pcrnn::sampling {

/// n_load x 6 strain history, one Voigt vector per row.
using PathMatrix = Eigen::Matrix<double, Eigen::Dynamic, 6>;

enum class Engine { sobol, lhs };

struct PathConfig {
  int n_load = 101;
  int n_c = 5;
  double zeta1 = 0.10;  // bound on every component
  double zeta2 = 0.04;  // bound on the trace
  double gp_variance = 0.0;   // 0 selects zeta1^2
  double gp_roughness = 0.0;  // 0 selects 8 / n_load^2
  int n_paths = 0;
  std::uint64_t seed = 0;
  Engine engine = Engine::sobol;

  void validate() const;
  double variance() const { return gp_variance > 0.0 ? gp_variance : zeta1 * zeta1; }
  double roughness() const {
    return gp_roughness > 0.0 ? gp_roughness : 8.0 / (double(n_load) * double(n_load));
  }
  /// 1-based steps of the control points: 1 + round(c (n_load - 1) / n_c), c = 1..n_c.
  std::vector<int> control_steps() const;
};

struct ControlPointSet {
  int path_index = 0;
  int attempt = 0;
  std::vector<int> steps;  // 1-based
  Eigen::Matrix<double, Eigen::Dynamic, 6> values;  // n_c x 6
  int redraws = 0;  // control points redrawn because the third normal strain left the box
};

struct StrainPath {
  int path_id = 0;
  std::uint64_t seed = 0;
  PathMatrix steps;
  int attempts = 1;  // whole-path draws needed to satisfy the bounds
};

/// Maximum redraws per control point and whole-path attempts.
inline constexpr int kMaxRedraws = 10000;

/// Control points for one path. `attempt` > 0 selects a fresh randomization
/// after a whole-path rejection.
ControlPointSet sample_control_points(const PathConfig& config, int path_index, int attempt = 0);

/// Squared-exponential covariance sigma^2 exp(-w (n - n')^2).
double gp_kernel(double n, double n_prime, double variance, double roughness);

/// Posterior mean through (step 1, 0) and every control point, at steps 1..n_load.
/// Step 1 is set to exactly zero.
PathMatrix gp_interpolate(const ControlPointSet& controls, const PathConfig& config);

/// True when every row satisfies the component and trace bounds.
bool within_bounds(const PathMatrix& steps, double zeta1, double zeta2);

/// One accepted path (rejecting and redrawing whole paths that leave the bounds).
StrainPath generate_path(const PathConfig& config, int path_index);

/// `config.n_paths` paths in index order, computed on `workers` threads.
std::vector<StrainPath> generate_paths(const PathConfig& config, int workers = 1);

}  // namespace pcrnn::sampling
