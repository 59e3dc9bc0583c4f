#include "pcrnn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "pcrnn/error.hpp"

namespace pcrnn::mesh {

void TetMesh::validate() const {
  if (elements.empty()) throw ParameterError("mesh has no elements");
  if (phase.size() != elements.size()) throw ParameterError("phase array does not match elements");
  for (int e = 0; e < num_elements(); ++e) {
    for (int n : elements[static_cast<std::size_t>(e)])
      if (n < 0 || n >= num_nodes()) throw ParameterError("element references a missing node");
    if (!(tet_geometry(*this, e).volume > 0.0))
      throw ParameterError("element " + std::to_string(e) + " has non-positive volume");
  }
}

TetGeometry tet_geometry(const TetMesh& mesh, int element) {
  const auto& conn = mesh.elements[static_cast<std::size_t>(element)];
  Eigen::Matrix4d X;
  TetGeometry g;
  for (int i = 0; i < 4; ++i) {
    const Vec3& p = mesh.nodes[static_cast<std::size_t>(conn[static_cast<std::size_t>(i)])];
    X(i, 0) = 1.0;
    X.block<1, 3>(i, 1) = p.transpose();
    g.centroid += 0.25 * p;
  }
  g.volume = X.determinant() / 6.0;
  const Eigen::Matrix4d C = X.inverse();  // column i holds the coefficients of N_i
  g.grads = C.bottomRows<3>().transpose();
  return g;
}

BMatrix strain_displacement(const Eigen::Matrix<double, 4, 3>& grads) {
  BMatrix B = BMatrix::Zero();
  for (int i = 0; i < 4; ++i) {
    const double gx = grads(i, 0), gy = grads(i, 1), gz = grads(i, 2);
    const int c = 3 * i;
    B(0, c) = gx;
    B(1, c + 1) = gy;
    B(2, c + 2) = gz;
    B(3, c) = gy;
    B(3, c + 1) = gx;
    B(4, c) = gz;
    B(4, c + 2) = gx;
    B(5, c + 1) = gz;
    B(5, c + 2) = gy;
  }
  return B;
}

TetMesh structured_box(int nx, int ny, int nz, const Vec3& size, const Vec3& origin) {
  if (nx < 1 || ny < 1 || nz < 1) throw ParameterError("box needs at least one cell per axis");
  TetMesh m;
  auto id = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        m.nodes.push_back(origin + Vec3(size.x() * i / nx, size.y() * j / ny, size.z() * k / nz));

  // Kuhn split: every tet contains the diagonal from local vertex 0 to 7.
  static constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                                      {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        int v[8];
        for (int c = 0; c < 8; ++c) v[c] = id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
        for (const auto& t : kTets) {
          std::array<int, 4> conn{v[t[0]], v[t[1]], v[t[2]], v[t[3]]};
          m.elements.push_back(conn);
          m.phase.push_back(kMatrix);
          if (tet_geometry(m, m.num_elements() - 1).volume < 0.0) {
            std::swap(m.elements.back()[2], m.elements.back()[3]);
          }
        }
      }
  return m;
}

std::vector<int> box_boundary_nodes(const TetMesh& mesh, double tol) {
  Vec3 lo = mesh.nodes.front(), hi = mesh.nodes.front();
  for (const Vec3& p : mesh.nodes) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double scale = (hi - lo).maxCoeff();
  std::vector<int> out;
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const Vec3& p = mesh.nodes[static_cast<std::size_t>(n)];
    bool on = false;
    for (int a = 0; a < 3; ++a)
      on = on || std::abs(p(a) - lo(a)) <= tol * scale || std::abs(p(a) - hi(a)) <= tol * scale;
    if (on) out.push_back(n);
  }
  return out;
}

double total_volume(const TetMesh& mesh) {
  double v = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) v += tet_geometry(mesh, e).volume;
  return v;
}

RveMesh make_rve(int n, double size, double pore_fraction) {
  if (!(size > 0.0)) throw ParameterError("RVE size must be positive");
  if (pore_fraction < 0.0 || pore_fraction >= 0.5) throw ParameterError("pore fraction must lie in [0, 0.5)");
  RveMesh rve;
  rve.mesh = structured_box(n, n, n, Vec3::Constant(size));
  rve.boundary_nodes = box_boundary_nodes(rve.mesh);
  rve.center = Vec3::Constant(0.5 * size);
  rve.volume = size * size * size;
  if (pore_fraction > 0.0) {
    const double radius = size * std::cbrt(3.0 * pore_fraction / (4.0 * std::numbers::pi));
    double void_volume = 0.0;
    for (int e = 0; e < rve.mesh.num_elements(); ++e) {
      const TetGeometry g = tet_geometry(rve.mesh, e);
      if ((g.centroid - rve.center).norm() < radius) {
        rve.mesh.phase[static_cast<std::size_t>(e)] = kVoid;
        void_volume += g.volume;
      }
    }
    rve.void_fraction = void_volume / rve.volume;
  }
  return rve;
}

}  // namespace pcrnn::mesh
