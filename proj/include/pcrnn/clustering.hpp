#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "pcrnn/mesh.hpp"

namespace pcrnn::micro {

struct ClusterMap {
  int k = 0;
  std::vector<int> assignment;  // element -> cluster
  std::vector<Vec3> centroids;
  int iterations = 0;
};

/// Lloyd iteration from a seeded k-means++ start. Stops when no assignment
/// changes or after `max_iterations`. Empty clusters take the point farthest
/// from the centroid of the currently largest cluster.
ClusterMap kmeans(const std::vector<Vec3>& points, int k, std::uint64_t seed, int max_iterations = 200);

/// k-means on element centroids, run separately per phase so every cluster
/// is pure matrix or pure void. Matrix clusters come first.
ClusterMap kmeans_cluster(const mesh::RveMesh& rve, int k, std::uint64_t seed);

/// Rigid-body basis of a point at `rel` from the cluster centroid:
/// rows [1 0 0 0 z -y; 0 1 0 -z 0 x; 0 0 1 y -x 0].
Eigen::Matrix<double, 3, 6> deflation_matrix(const Vec3& rel);

}  // namespace pcrnn::micro
