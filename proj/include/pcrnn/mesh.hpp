#pragma once

// Linear tetrahedral meshes shared by the RVE and macro solvers.

#include <array>
#include <vector>

#include <Eigen/Core>

#include "pcrnn/voigt.hpp"

namespace pcrnn::mesh {

enum Phase : int { kMatrix = 0, kVoid = 1 };

struct TetMesh {
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> elements;
  std::vector<int> phase;  // per element; kMatrix unless marked otherwise

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }
  /// Throws ParameterError on bad connectivity or non-positive volumes.
  void validate() const;
};

struct TetGeometry {
  double volume = 0.0;
  Eigen::Matrix<double, 4, 3> grads;  // shape-function gradients, one row per node
  Vec3 centroid = Vec3::Zero();
};

using BMatrix = Eigen::Matrix<double, 6, 12>;

TetGeometry tet_geometry(const TetMesh& mesh, int element);

/// Strain-displacement matrix mapping the 12 nodal displacements to Voigt strain.
BMatrix strain_displacement(const Eigen::Matrix<double, 4, 3>& grads);

/// nx x ny x nz hexahedra, each split into six tetrahedra around its main diagonal.
/// Node (i, j, k) has index i + (nx+1) (j + (ny+1) k).
TetMesh structured_box(int nx, int ny, int nz, const Vec3& size, const Vec3& origin = Vec3::Zero());

/// Nodes on the outer faces of a structured box.
std::vector<int> box_boundary_nodes(const TetMesh& mesh, double tol = 1e-9);

double total_volume(const TetMesh& mesh);

/// Cube RVE with an optional centred spherical pore.
struct RveMesh {
  TetMesh mesh;
  std::vector<int> boundary_nodes;
  Vec3 center = Vec3::Zero();
  double volume = 0.0;
  double void_fraction = 0.0;  // realized on the mesh
};

/// n^3 cells of edge `size` (um). Elements whose centroid falls inside the
/// sphere of volume fraction `pore_fraction` become void; 0 gives a solid cube.
RveMesh make_rve(int n, double size = 100.0, double pore_fraction = 0.0625);

}  // namespace pcrnn::mesh
