#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pcrnn/microsolver.hpp"
#include "pcrnn/sampling.hpp"

namespace pcrnn::micro {

/// Homogenized response of one strain path.
struct ResponseRecord {
  int path_id = 0;
  sampling::PathMatrix strain;
  sampling::PathMatrix stress;  // S_M, MPa
  Eigen::VectorXd damage;       // D_M
  Eigen::VectorXd work;         // cumulative sum of S_t : dE_t
  int damage_corrections = 0;
  int refined_steps = 0;
  double max_hill_mandel = 0.0;
};

struct DatabaseOptions {
  bool use_reduced = false;
  int clusters = 96;
  std::uint64_t cluster_seed = 0;
  SolverOptions solver;
  int workers = 1;
  double max_failure_rate = 0.10;
};

struct PathFailure {
  int path_id = 0;
  std::string message;
};

struct Database {
  std::vector<ResponseRecord> records;  // ordered by path_id
  std::vector<PathFailure> failures;
};

/// Runs the RVE along one path with unit time steps. Row 0 is the zero state.
ResponseRecord solve_path(const RveSolver& solver, const sampling::StrainPath& path);

/// Throws ArtifactError naming the first broken invariant
/// (damage range or monotonicity, work below -1e-8, non-finite values).
void check_record(const ResponseRecord& record);

/// One record per path; failed paths are skipped and listed. More than
/// `max_failure_rate` failures raises SolverError.
Database build_database(const std::vector<sampling::StrainPath>& paths, const mesh::RveMesh& rve,
                        const constitutive::MaterialModel& material, const DatabaseOptions& options);

}  // namespace pcrnn::micro
