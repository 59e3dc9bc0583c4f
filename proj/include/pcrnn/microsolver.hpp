#pragma once

// RVE boundary-value problem under affine displacement boundary conditions.
//
// The full solve and the clustered reduced solve share one engine: unknowns x
// map linearly to the strains of a set of integration "points" (elements for
// the full solve, clusters for the reduced one),
//
//     eps_p = A_p x + P_p E,
//
// where E is the macro strain. Each point carries one constitutive state and
// a matrix volume fraction; the rest of its volume is void.

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pcrnn/clustering.hpp"
#include "pcrnn/constitutive.hpp"
#include "pcrnn/mesh.hpp"

namespace pcrnn::micro {

struct SolverOptions {
  double tolerance = 1e-6;  // residual relative to the internal force scale
  int max_iterations = 10;
  double void_stiffness_scale = 1e-6;
  double stabilization = 1e-8;  // residual stiffness fraction of fully damaged points
  bool allow_refinement = true;  // halve the step once before failing
  bool cluster_stretch = true;   // reduced basis: rigid motions plus uniform stretch per cluster
};

struct MicroState {
  Eigen::VectorXd x;
  std::vector<constitutive::PointState> points;
  Vec6 macro_strain = Vec6::Zero();
  double damage = 0.0;  // effective damage of the last step
  int damage_corrections = 0;  // steps where the raw effective damage fell and was held
};

struct StepResult {
  Vec6 stress = Vec6::Zero();            // S_M
  Vec6 reference_stress = Vec6::Zero();  // S0_M
  double damage = 0.0;                   // D_M after the monotone hold
  double raw_damage = 0.0;
  int iterations = 0;
  double residual = 0.0;  // relative
  bool refined = false;
  double hill_mandel = 0.0;  // relative gap between S_M:dE and <S_m:de>
  std::vector<Vec6> point_stress;    // volume mean per integration point
  std::vector<Vec6> element_stress;  // per mesh element
};

/// Prescribed displacement E (p - center) for each node in `rve.boundary_nodes`.
std::vector<Vec3> apply_affine_bc(const mesh::RveMesh& rve, const Vec6& macro_strain);

/// Volume-weighted average.
Vec6 homogenize_stress(std::span<const Vec6> stress, std::span<const double> volume);

/// 1 - |S:S0| / (S0:S0), clamped to [0, 1]; `previous` when |S0| < 1e-12.
double effective_damage(const Vec6& stress, const Vec6& reference_stress, double previous);

struct ProjectedModel;

/// Not thread-safe (it caches a factorization); use one instance per worker.
class RveSolver {
 public:
  static RveSolver full(const mesh::RveMesh& rve, const constitutive::MaterialModel& material,
                        const SolverOptions& options = {});
  /// Cluster-wise rigid motions of the free nodes as unknowns, one state per cluster.
  static RveSolver reduced(const mesh::RveMesh& rve, const ClusterMap& clusters,
                           const constitutive::MaterialModel& material,
                           const SolverOptions& options = {});

  RveSolver(const RveSolver& other);
  RveSolver& operator=(const RveSolver& other);
  RveSolver(RveSolver&&) noexcept;
  RveSolver& operator=(RveSolver&&) noexcept;
  ~RveSolver();

  MicroState initial_state() const;

  /// Equilibrium at macro strain `E` after time increment `dt`; `next` receives
  /// the committed state. Throws SolverError when Newton fails after refinement.
  StepResult solve_step(const Vec6& E, double dt, const MicroState& state, MicroState& next) const;

  /// Nodal displacements (3 per node) including the prescribed boundary.
  Eigen::VectorXd displacement(const MicroState& state) const;

  int num_points() const;
  int num_unknowns() const;
  bool is_reduced() const;
  double volume() const;
  const std::vector<double>& point_volumes() const;
  const constitutive::MaterialModel& material() const { return material_; }

 private:
  struct Cache;
  RveSolver(std::shared_ptr<const ProjectedModel> model, const constitutive::MaterialModel& material,
            const SolverOptions& options);
  StepResult attempt(const Vec6& E, double dt, const MicroState& state, MicroState& next) const;
  double hill_mandel_gap(const MicroState& before, const MicroState& after, const StepResult& r) const;

  std::shared_ptr<const ProjectedModel> model_;
  constitutive::MaterialModel material_;
  SolverOptions options_;
  std::unique_ptr<Cache> cache_;
};

}  // namespace pcrnn::micro
