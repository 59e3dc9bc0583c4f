#pragma once

// Shared representation of the full and reduced RVE discretizations.

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pcrnn/mesh.hpp"

namespace pcrnn::micro {

struct ProjectedModel {
  bool reduced = false;
  int n_points = 0;
  int n_unknowns = 0;
  int n_nodes = 0;
  double volume = 0.0;
  double length = 0.0;  // cube root of the volume, for force scales

  std::vector<double> point_volume;
  std::vector<double> matrix_fraction;
  std::vector<double> length_scale;  // (V_p / mean element volume)^(1/3)

  // Element level: stresses are evaluated per element from its own strain;
  // the internal state of matrix elements is shared by their point.
  int n_elements = 0;
  std::vector<double> element_volume;
  std::vector<int> element_point;
  std::vector<char> element_matrix;
  Eigen::SparseMatrix<double> A_el;               // 6 n_elements x n_unknowns
  Eigen::Matrix<double, Eigen::Dynamic, 6> P_el;  // 6 n_elements x 6

  // Point level: mean strain of the point's matrix elements (all elements
  // for a point without matrix), which drives the state update.
  Eigen::SparseMatrix<double> A;               // 6P x n_unknowns
  Eigen::Matrix<double, Eigen::Dynamic, 6> P;  // 6P x 6
  Eigen::SparseMatrix<double> Phi;             // 3 n_free x n_unknowns
  Eigen::Matrix<double, Eigen::Dynamic, 6> free_affine;  // 3 n_free x 6

  std::vector<int> free_index;  // node -> free slot, -1 on the boundary
  std::vector<int> boundary_nodes;
  std::vector<Eigen::Matrix<double, 3, 6>> boundary_map;
};

/// u = E_tensor r as a linear map of the Voigt strain (engineering shear).
Eigen::Matrix<double, 3, 6> affine_map(const Vec3& r);

/// Fills everything except Phi and n_unknowns, which the caller sets first.
void assemble_projection(const mesh::RveMesh& rve, const std::vector<int>& element_point, int n_points,
                         ProjectedModel& model);

}  // namespace pcrnn::micro
