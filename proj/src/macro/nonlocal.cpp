#include <cmath>

#include "pcrnn/error.hpp"
#include "pcrnn/macro.hpp"

namespace pcrnn::macro {

double bell_weight(double distance, double length) {
  const double v = std::max(0.0, 1.0 - 4.0 * distance * distance / (length * length));
  return v * v;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> nonlocal_weights(std::span<const Vec3> points,
                                                              std::span<const double> volumes,
                                                              double length) {
  if (!(length > 0.0)) throw ParameterError("non-local length must be positive");
  if (points.size() != volumes.size()) throw ParameterError("points and volumes differ in length");
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  const double radius = 0.5 * length;
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<std::pair<Eigen::Index, double>> row;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = (points[static_cast<std::size_t>(i)] - points[static_cast<std::size_t>(j)]).norm();
      if (d >= radius) continue;
      const double w = bell_weight(d, length) * volumes[static_cast<std::size_t>(j)];
      row.emplace_back(j, w);
      sum += w;
    }
    for (const auto& [j, w] : row) trip.emplace_back(i, j, w / sum);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> W(n, n);
  W.setFromTriplets(trip.begin(), trip.end());
  return W;
}

Eigen::VectorXd nonlocal_damage(const Eigen::VectorXd& local,
                                const Eigen::SparseMatrix<double, Eigen::RowMajor>& weights) {
  if (weights.cols() != local.size()) throw ParameterError("weights do not match the damage field");
  return weights * local;
}

surrogate::PathMatrix padded_input(int n_load, std::span<const Vec6> converged, const Vec6& iterate) {
  const int i = static_cast<int>(converged.size()) + 1;
  if (i > n_load)
    throw CapacityError("load step " + std::to_string(i) + " exceeds the surrogate sequence length " +
                        std::to_string(n_load));
  surrogate::PathMatrix E(n_load, 6);
  for (int t = 0; t < i - 1; ++t) E.row(t) = converged[static_cast<std::size_t>(t)].transpose();
  for (int t = i - 1; t < n_load; ++t) E.row(t) = iterate.transpose();
  return E;
}

QueryResult surrogate_query(const surrogate::SurrogateModel& model, std::span<const Vec6> converged,
                            const Vec6& iterate) {
  const surrogate::PathMatrix E = padded_input(model.n_load, converged, iterate);
  const surrogate::SequenceOutput out = surrogate::forward_sequence(model, E);
  const Eigen::Index t = static_cast<Eigen::Index>(converged.size());
  QueryResult q;
  q.stress = out.stress.row(t).transpose();
  q.reference_stress = out.reference_stress.row(t).transpose();
  q.damage = out.damage(t);
  for (const auto& h : out.hidden)
    q.hidden_before.push_back(t == 0 ? Eigen::VectorXd::Zero(h.cols()) : Eigen::VectorXd(h.row(t - 1).transpose()));
  return q;
}

}  // namespace pcrnn::macro
