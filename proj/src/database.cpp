#include "pcrnn/database.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "pcrnn/error.hpp"
#include "pcrnn/util.hpp"

namespace pcrnn::micro {

ResponseRecord solve_path(const RveSolver& solver, const sampling::StrainPath& path) {
  const Eigen::Index n = path.steps.rows();
  if (n < 1) throw ParameterError("empty strain path");
  ResponseRecord rec;
  rec.path_id = path.path_id;
  rec.strain = path.steps;
  rec.stress = sampling::PathMatrix::Zero(n, 6);
  rec.damage = Eigen::VectorXd::Zero(n);
  rec.work = Eigen::VectorXd::Zero(n);

  MicroState state = solver.initial_state();
  state.macro_strain = path.steps.row(0).transpose();
  for (Eigen::Index t = 1; t < n; ++t) {
    MicroState next;
    const StepResult r = solver.solve_step(path.steps.row(t).transpose(), 1.0, state, next);
    rec.stress.row(t) = r.stress.transpose();
    rec.damage(t) = r.damage;
    rec.work(t) = rec.work(t - 1) + r.stress.dot(path.steps.row(t).transpose() - path.steps.row(t - 1).transpose());
    if (r.refined) ++rec.refined_steps;
    if (!solver.is_reduced()) rec.max_hill_mandel = std::max(rec.max_hill_mandel, r.hill_mandel);
    state = std::move(next);
  }
  rec.damage_corrections = state.damage_corrections;
  return rec;
}

void check_record(const ResponseRecord& rec) {
  const std::string where = "record " + std::to_string(rec.path_id) + ": ";
  const Eigen::Index n = rec.strain.rows();
  if (rec.stress.rows() != n || rec.damage.size() != n || rec.work.size() != n)
    throw ArtifactError(where + "sequence lengths differ");
  if (!rec.strain.allFinite() || !rec.stress.allFinite() || !rec.damage.allFinite() || !rec.work.allFinite())
    throw ArtifactError(where + "non-finite value");
  for (Eigen::Index t = 0; t < n; ++t) {
    if (rec.damage(t) < 0.0 || rec.damage(t) > 1.0)
      throw ArtifactError(where + "damage outside [0,1] at step " + std::to_string(t + 1));
    if (t > 0 && rec.damage(t) < rec.damage(t - 1))
      throw ArtifactError(where + "damage decreases at step " + std::to_string(t + 1));
    if (rec.work(t) < -1e-8)
      throw ArtifactError(where + "cumulative work below -1e-8 at step " + std::to_string(t + 1));
  }
}

Database build_database(const std::vector<sampling::StrainPath>& paths, const mesh::RveMesh& rve,
                        const constitutive::MaterialModel& material, const DatabaseOptions& options) {
  Database db;
  if (paths.empty()) return db;

  std::optional<RveSolver> prototype;
  if (options.use_reduced) {
    const ClusterMap clusters = kmeans_cluster(rve, options.clusters, options.cluster_seed);
    prototype.emplace(RveSolver::reduced(rve, clusters, material, options.solver));
  } else {
    prototype.emplace(RveSolver::full(rve, material, options.solver));
  }

  std::vector<std::optional<ResponseRecord>> results(paths.size());
  std::vector<std::string> errors(paths.size());
  const int workers = std::max(1, options.workers);
  // One solver copy per path keeps factorization caches private to a thread.
  parallel_for(paths.size(), workers, [&](std::size_t i) {
    RveSolver solver(*prototype);
    try {
      ResponseRecord rec = solve_path(solver, paths[i]);
      check_record(rec);
      results[i] = std::move(rec);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (results[i]) db.records.push_back(std::move(*results[i]));
    else db.failures.push_back({paths[i].path_id, errors[i]});
  }
  const double rate = double(db.failures.size()) / double(paths.size());
  if (rate > options.max_failure_rate)
    throw SolverError("database build failed on " + std::to_string(db.failures.size()) + " of " +
                      std::to_string(paths.size()) + " paths; first: " + db.failures.front().message);
  return db;
}

}  // namespace pcrnn::micro
