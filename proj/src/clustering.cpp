#include "pcrnn/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pcrnn/error.hpp"
#include "pcrnn/util.hpp"

namespace pcrnn::micro {

namespace {

int nearest(const Vec3& p, const std::vector<Vec3>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = (p - centroids[c]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace

ClusterMap kmeans(const std::vector<Vec3>& points, int k, std::uint64_t seed, int max_iterations) {
  if (k <= 0) throw ParameterError("cluster count must be positive");
  const int n = static_cast<int>(points.size());
  if (k > n) throw ParameterError("more clusters than points");

  std::mt19937_64 rng(seed);
  ClusterMap map;
  map.k = k;

  // k-means++ seeding.
  std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  int first = std::uniform_int_distribution<int>(0, n - 1)(rng);
  map.centroids.push_back(points[static_cast<std::size_t>(first)]);
  chosen[static_cast<std::size_t>(first)] = 1;
  while (static_cast<int>(map.centroids.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t ii = static_cast<std::size_t>(i);
      dist[ii] = std::min(dist[ii], (points[ii] - map.centroids.back()).squaredNorm());
      if (!chosen[ii]) total += dist[ii];
    }
    int pick = -1;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (int i = 0; i < n; ++i) {
        const std::size_t ii = static_cast<std::size_t>(i);
        if (chosen[ii]) continue;
        pick = i;
        r -= dist[ii];
        if (r <= 0.0) break;
      }
    } else {  // duplicates only: take the next unchosen point
      for (int i = 0; i < n && pick < 0; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) pick = i;
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    map.centroids.push_back(points[static_cast<std::size_t>(pick)]);
  }

  map.assignment.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      const int c = nearest(points[static_cast<std::size_t>(i)], map.centroids);
      if (c != map.assignment[static_cast<std::size_t>(i)]) {
        map.assignment[static_cast<std::size_t>(i)] = c;
        changed = true;
      }
    }
    map.iterations = it + 1;

    // Repair empty clusters before recomputing centroids.
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (int a : map.assignment) ++count[static_cast<std::size_t>(a)];
    for (int c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) continue;
      const int largest = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (map.assignment[static_cast<std::size_t>(i)] != largest) continue;
        const double d = (points[static_cast<std::size_t>(i)] - map.centroids[static_cast<std::size_t>(largest)]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      map.assignment[static_cast<std::size_t>(far)] = c;
      --count[static_cast<std::size_t>(largest)];
      ++count[static_cast<std::size_t>(c)];
      changed = true;
    }

    std::vector<Vec3> sum(static_cast<std::size_t>(k), Vec3::Zero());
    for (int i = 0; i < n; ++i) sum[static_cast<std::size_t>(map.assignment[static_cast<std::size_t>(i)])] += points[static_cast<std::size_t>(i)];
    for (int c = 0; c < k; ++c)
      map.centroids[static_cast<std::size_t>(c)] = sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)];
    if (!changed) break;
  }
  return map;
}

ClusterMap kmeans_cluster(const mesh::RveMesh& rve, int k, std::uint64_t seed) {
  const int n = rve.mesh.num_elements();
  if (k < 1 || k > n) throw ParameterError("cluster count must lie in [1, element count]");
  std::vector<int> by_phase[2];
  std::vector<Vec3> centroids[2];
  for (int e = 0; e < n; ++e) {
    const int ph = rve.mesh.phase[static_cast<std::size_t>(e)] == mesh::kMatrix ? 0 : 1;
    by_phase[ph].push_back(e);
    centroids[ph].push_back(mesh::tet_geometry(rve.mesh, e).centroid);
  }
  // Clusters split between phases in proportion to element counts.
  int k_void = 0;
  if (!by_phase[1].empty()) {
    k_void = std::clamp(static_cast<int>(std::lround(double(k) * by_phase[1].size() / n)), 1, k - 1);
    if (by_phase[0].empty()) k_void = k;
  }
  const int ks[2] = {k - k_void, k_void};
  ClusterMap out;
  out.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int ph = 0; ph < 2; ++ph) {
    if (by_phase[ph].empty()) continue;
    const int kk = std::min<int>(ks[ph], static_cast<int>(by_phase[ph].size()));
    const ClusterMap part = kmeans(centroids[ph], kk, derive_seed(seed, "phase", static_cast<std::uint64_t>(ph)));
    for (std::size_t i = 0; i < by_phase[ph].size(); ++i)
      out.assignment[static_cast<std::size_t>(by_phase[ph][i])] = out.k + part.assignment[i];
    out.centroids.insert(out.centroids.end(), part.centroids.begin(), part.centroids.end());
    out.k += part.k;
    out.iterations = std::max(out.iterations, part.iterations);
  }
  return out;
}

Eigen::Matrix<double, 3, 6> deflation_matrix(const Vec3& rel) {
  const double x = rel.x(), y = rel.y(), z = rel.z();
  Eigen::Matrix<double, 3, 6> W;
  W << 1, 0, 0, 0, z, -y,
       0, 1, 0, -z, 0, x,
       0, 0, 1, y, -x, 0;
  return W;
}

}  // namespace pcrnn::micro
