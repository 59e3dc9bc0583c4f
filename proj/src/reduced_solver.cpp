// Cluster-wise rigid-motion reduction of the RVE problem.

#include <algorithm>
#include <map>

#include <Eigen/SVD>

#include "pcrnn/error.hpp"
#include "pcrnn/microsolver.hpp"
#include "projected_model.hpp"

namespace pcrnn::micro {

RveSolver RveSolver::reduced(const mesh::RveMesh& rve, const ClusterMap& clusters,
                             const constitutive::MaterialModel& material, const SolverOptions& options) {
  const auto& mesh = rve.mesh;
  mesh.validate();
  if (static_cast<int>(clusters.assignment.size()) != mesh.num_elements())
    throw ParameterError("cluster map does not match the mesh");
  if (static_cast<int>(clusters.centroids.size()) != clusters.k) throw ParameterError("cluster map is inconsistent");

  auto m = std::make_shared<ProjectedModel>();
  m->reduced = true;
  m->free_index.assign(static_cast<std::size_t>(mesh.num_nodes()), 0);
  for (int n : rve.boundary_nodes) m->free_index[static_cast<std::size_t>(n)] = -1;
  int n_free = 0;
  for (int& f : m->free_index)
    if (f >= 0) f = n_free++;
  m->boundary_nodes = rve.boundary_nodes;

  // Each free node follows the cluster holding most of its adjacent
  // stiffness-weighted volume, so pore-surface nodes move with the matrix.
  std::vector<std::map<int, double>> adjacent(static_cast<std::size_t>(mesh.num_nodes()));
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const double v = mesh::tet_geometry(mesh, e).volume *
                     (mesh.phase[static_cast<std::size_t>(e)] == mesh::kMatrix ? 1.0 : options.void_stiffness_scale);
    for (int n : mesh.elements[static_cast<std::size_t>(e)])
      adjacent[static_cast<std::size_t>(n)][clusters.assignment[static_cast<std::size_t>(e)]] += v;
  }
  std::vector<std::vector<int>> members(static_cast<std::size_t>(clusters.k));
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    if (m->free_index[static_cast<std::size_t>(n)] < 0) continue;
    const auto& adj = adjacent[static_cast<std::size_t>(n)];
    const auto best = std::max_element(adj.begin(), adj.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    members[static_cast<std::size_t>(best->first)].push_back(n);
  }

  // Rigid basis per cluster, restricted to the directions its nodes can
  // actually express (a single node has only its three translations).
  std::vector<Eigen::Triplet<double>> trip;
  int offset = 0;
  for (int c = 0; c < clusters.k; ++c) {
    const auto& nodes = members[static_cast<std::size_t>(c)];
    if (nodes.empty()) continue;
    const Vec3& centroid = clusters.centroids[static_cast<std::size_t>(c)];
    const int modes = options.cluster_stretch ? 12 : 6;
    Eigen::MatrixXd W(3 * nodes.size(), modes);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Vec3 rel = mesh.nodes[static_cast<std::size_t>(nodes[i])] - centroid;
      const auto rows = static_cast<Eigen::Index>(3 * i);
      W.block(rows, 0, 3, 6) = deflation_matrix(rel);
      if (modes == 12) W.block(rows, 6, 3, 6) = affine_map(rel);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-9 * sv(0)) ++rank;
    const Eigen::MatrixXd basis = W * svd.matrixV().leftCols(rank);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const int f = m->free_index[static_cast<std::size_t>(nodes[i])];
      for (int r = 0; r < 3; ++r)
        for (int j = 0; j < rank; ++j) {
          const double v = basis(static_cast<Eigen::Index>(3 * i) + r, j);
          if (v != 0.0) trip.emplace_back(3 * f + r, offset + j, v);
        }
    }
    offset += rank;
  }
  m->n_unknowns = offset;
  m->Phi.resize(3 * n_free, offset);
  m->Phi.setFromTriplets(trip.begin(), trip.end());

  assemble_projection(rve, clusters.assignment, clusters.k, *m);
  return RveSolver(std::move(m), material, options);
}

}  // namespace pcrnn::micro
