#include "pcrnn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <boost/random/sobol.hpp>

#include "pcrnn/error.hpp"
#include "pcrnn/util.hpp"

namespace pcrnn::sampling {

namespace {

// Quasi-random point in [0,1)^dim. Sobol points get a seeded digital shift
// (XOR of the 64-bit coordinates), which keeps the net structure intact.
Eigen::VectorXd unit_point(const PathConfig& config, int path_index, int attempt, int dim) {
  Eigen::VectorXd u(dim);
  if (config.engine == Engine::sobol) {
    boost::random::sobol engine(static_cast<std::size_t>(dim));
    engine.seed(static_cast<std::uint64_t>(path_index) + 1);  // point 0 is the origin
    std::mt19937_64 shift_rng(derive_seed(config.seed, "sobol-shift", std::uint64_t(attempt)));
    for (int j = 0; j < dim; ++j) {
      const std::uint64_t shifted = std::uint64_t(engine()) ^ shift_rng();
      u(j) = double(shifted >> 11) * 0x1.0p-53;
    }
  } else {
    const int n = std::max(config.n_paths, path_index + 1);
    for (int j = 0; j < dim; ++j) {
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      std::mt19937_64 perm_rng(derive_seed(config.seed, "lhs-perm",
                                           std::uint64_t(attempt) * 100003ULL + std::uint64_t(j)));
      std::shuffle(perm.begin(), perm.end(), perm_rng);
      std::mt19937_64 jitter(derive_seed(config.seed, "lhs-jitter",
                                         (std::uint64_t(attempt) << 40) ^
                                             (std::uint64_t(path_index) << 12) ^ std::uint64_t(j)));
      const double offset = std::uniform_real_distribution<double>(0.0, 1.0)(jitter);
      u(j) = (perm[static_cast<std::size_t>(path_index)] + offset) / n;
    }
  }
  return u;
}

// Maps six unit coordinates to (E1, E2, Evol, E12, E13, E23) and resolves E3.
Eigen::Matrix<double, 1, 6> control_from_unit(const double* u, double zeta1, double zeta2) {
  const double e1 = zeta1 * (2.0 * u[0] - 1.0);
  const double e2 = zeta1 * (2.0 * u[1] - 1.0);
  const double vol = zeta2 * (2.0 * u[2] - 1.0);
  Eigen::Matrix<double, 1, 6> row;
  row << e1, e2, vol - e1 - e2, zeta1 * (2.0 * u[3] - 1.0), zeta1 * (2.0 * u[4] - 1.0),
      zeta1 * (2.0 * u[5] - 1.0);
  return row;
}

}  // namespace

void PathConfig::validate() const {
  if (n_c < 2) throw ParameterError("n_c must be at least 2");
  if (n_c > n_load) throw ParameterError("n_c must not exceed n_load");
  if (n_load < 2) throw ParameterError("n_load must be at least 2");
  if (!(zeta1 > 0.0 && zeta2 > 0.0)) throw ParameterError("strain bounds must be positive");
  if (zeta2 > 3.0 * zeta1) throw ParameterError("zeta2 must not exceed 3 zeta1");
  if (gp_variance < 0.0 || gp_roughness < 0.0)
    throw ParameterError("GP hyperparameters must be positive (or 0 for defaults)");
  if (n_paths < 0) throw ParameterError("n_paths must be non-negative");
  // Distinct control steps are needed for a non-singular conditioning set.
  const auto steps = control_steps();
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (steps[i] <= (i == 0 ? 1 : steps[i - 1]))
      throw ParameterError("control steps collide; reduce n_c or raise n_load");
}

std::vector<int> PathConfig::control_steps() const {
  std::vector<int> steps;
  for (int c = 1; c <= n_c; ++c)
    steps.push_back(1 + static_cast<int>(std::lround(double(c) * (n_load - 1) / n_c)));
  return steps;
}

ControlPointSet sample_control_points(const PathConfig& config, int path_index, int attempt) {
  config.validate();
  if (path_index < 0) throw ParameterError("path index must be non-negative");
  ControlPointSet out;
  out.path_index = path_index;
  out.attempt = attempt;
  out.steps = config.control_steps();
  out.values.resize(config.n_c, 6);

  const Eigen::VectorXd u = unit_point(config, path_index, attempt, 6 * config.n_c);
  for (int c = 0; c < config.n_c; ++c) {
    Eigen::Matrix<double, 1, 6> row = control_from_unit(u.data() + 6 * c, config.zeta1, config.zeta2);
    int redraw = 0;
    while (std::abs(row(2)) > config.zeta1) {
      if (redraw >= kMaxRedraws)
        throw SamplingError("control point rejected " + std::to_string(kMaxRedraws) +
                            " times; zeta bounds are incompatible");
      const std::uint64_t key = (std::uint64_t(path_index) << 32) ^
                                (std::uint64_t(attempt) << 20) ^ (std::uint64_t(c) << 16);
      std::mt19937_64 rng(derive_seed(config.seed, "control-redraw", key ^ mix64(std::uint64_t(redraw))));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      double v[6];
      for (double& x : v) x = unif(rng);
      row = control_from_unit(v, config.zeta1, config.zeta2);
      ++redraw;
    }
    out.redraws += redraw;
    out.values.row(c) = row;
  }
  return out;
}

double gp_kernel(double n, double n_prime, double variance, double roughness) {
  const double d = n - n_prime;
  return variance * std::exp(-roughness * d * d);
}

PathMatrix gp_interpolate(const ControlPointSet& controls, const PathConfig& config) {
  const int m = static_cast<int>(controls.steps.size()) + 1;
  if (controls.values.rows() != m - 1) throw ParameterError("control values and steps disagree");
  const double var = config.variance();
  const double w = config.roughness();

  Eigen::VectorXd t(m);
  t(0) = 1.0;
  for (int c = 1; c < m; ++c) {
    const int s = controls.steps[static_cast<std::size_t>(c - 1)];
    if (s <= 1 || s > config.n_load) throw ParameterError("control step outside (1, n_load]");
    t(c) = s;
  }
  Eigen::MatrixXd K(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) K(i, j) = gp_kernel(t(i), t(j), var, w);

  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    K.diagonal().array() += 1e-10 * var;
    llt.compute(K);
    if (llt.info() != Eigen::Success) throw NumericalError("GP kernel matrix is singular");
  }

  Eigen::Matrix<double, Eigen::Dynamic, 6> y(m, 6);
  y.row(0).setZero();
  y.bottomRows(m - 1) = controls.values;
  const Eigen::Matrix<double, Eigen::Dynamic, 6> alpha = llt.solve(y);

  PathMatrix out(config.n_load, 6);
  Eigen::RowVectorXd k(m);
  for (int s = 1; s <= config.n_load; ++s) {
    for (int j = 0; j < m; ++j) k(j) = gp_kernel(double(s), t(j), var, w);
    out.row(s - 1) = k * alpha;
  }
  out.row(0).setZero();
  return out;
}

bool within_bounds(const PathMatrix& steps, double zeta1, double zeta2) {
  for (Eigen::Index r = 0; r < steps.rows(); ++r) {
    if (steps.row(r).cwiseAbs().maxCoeff() > zeta1) return false;
    if (std::abs(steps(r, 0) + steps(r, 1) + steps(r, 2)) > zeta2) return false;
  }
  return true;
}

StrainPath generate_path(const PathConfig& config, int path_index) {
  StrainPath path;
  path.path_id = path_index;
  path.seed = derive_seed(config.seed, "path", std::uint64_t(path_index));
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    const ControlPointSet controls = sample_control_points(config, path_index, attempt);
    PathMatrix steps = gp_interpolate(controls, config);
    if (within_bounds(steps, config.zeta1, config.zeta2)) {
      path.steps = std::move(steps);
      path.attempts = attempt + 1;
      return path;
    }
  }
  throw SamplingError("path " + std::to_string(path_index) + " left the strain bounds on every attempt");
}

std::vector<StrainPath> generate_paths(const PathConfig& config, int workers) {
  config.validate();
  std::vector<StrainPath> paths(static_cast<std::size_t>(config.n_paths));
  parallel_for(paths.size(), workers,
               [&](std::size_t i) { paths[i] = generate_path(config, static_cast<int>(i)); });
  return paths;
}

}  // namespace pcrnn::sampling
