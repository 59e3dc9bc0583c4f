#include <cmath>

#include "pcrnn/error.hpp"
#include "pcrnn/macro.hpp"

namespace pcrnn::macro {

namespace {

std::vector<int> nodes_where(const mesh::TetMesh& m, int axis, double value) {
  std::vector<int> out;
  for (int n = 0; n < m.num_nodes(); ++n)
    if (std::abs(m.nodes[static_cast<std::size_t>(n)](axis) - value) < 1e-9) out.push_back(n);
  return out;
}

int node_at(const mesh::TetMesh& m, const Vec3& p) {
  for (int n = 0; n < m.num_nodes(); ++n)
    if ((m.nodes[static_cast<std::size_t>(n)] - p).norm() < 1e-9) return n;
  throw ParameterError("fixture node not found");
}

}  // namespace

mesh::TetMesh remove_elements(const mesh::TetMesh& in, const std::vector<bool>& remove) {
  if (remove.size() != in.elements.size()) throw ParameterError("removal mask does not match elements");
  std::vector<int> map(in.nodes.size(), -1);
  mesh::TetMesh out;
  for (std::size_t e = 0; e < in.elements.size(); ++e) {
    if (remove[e]) continue;
    std::array<int, 4> conn{};
    for (int a = 0; a < 4; ++a) {
      const std::size_t n = static_cast<std::size_t>(in.elements[e][static_cast<std::size_t>(a)]);
      if (map[n] < 0) {
        map[n] = out.num_nodes();
        out.nodes.push_back(in.nodes[n]);
      }
      conn[static_cast<std::size_t>(a)] = map[n];
    }
    out.elements.push_back(conn);
    out.phase.push_back(in.phase[e]);
  }
  return out;
}

MacroProblem one_element_problem(std::vector<double> schedule) {
  MacroProblem p;
  p.mesh.nodes = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  p.mesh.elements = {{0, 1, 2, 3}};
  p.mesh.phase = {mesh::kMatrix};
  p.dirichlet = {
      {"origin_x", {0}, 0, 0.0}, {"origin_y", {0}, 1, 0.0}, {"origin_z", {0}, 2, 0.0},
      {"pull", {1}, 0, 1.0},     {"x_axis_y", {1}, 1, 0.0}, {"x_axis_z", {1}, 2, 0.0},
      {"y_axis_x", {2}, 0, 0.0}, {"y_axis_z", {2}, 2, 0.0}, {"z_axis_x", {3}, 0, 0.0},
      {"z_axis_y", {3}, 1, 0.0},
  };
  p.schedule = std::move(schedule);
  p.driven = "pull";
  p.set_binding(Binding::mono);
  p.macro_damage = false;
  return p;
}

MacroProblem cube_problem(double size, std::vector<double> schedule) {
  MacroProblem p;
  p.mesh = mesh::structured_box(1, 1, 2, Vec3::Constant(size));
  const int origin = node_at(p.mesh, Vec3(0, 0, 0));
  const int x_corner = node_at(p.mesh, Vec3(size, 0, 0));
  p.dirichlet = {
      {"bottom", nodes_where(p.mesh, 2, 0.0), 2, 0.0},
      {"origin_x", {origin}, 0, 0.0},
      {"origin_y", {origin}, 1, 0.0},
      {"corner_y", {x_corner}, 1, 0.0},
      {"top", nodes_where(p.mesh, 2, size), 2, 1.0},
  };
  p.schedule = std::move(schedule);
  p.driven = "top";
  p.set_binding(Binding::mono);
  p.macro_damage = false;
  return p;
}

MacroProblem notched_bar_problem(int level, std::vector<double> schedule) {
  if (level < 0 || level > 3) throw ParameterError("notched bar level must lie in [0, 3]");
  const int f = 1 << level;
  const double L = 20.0, W = 10.0, T = 2.0;
  const double notch_half_width = 1.0, notch_depth = 2.0;
  mesh::TetMesh box = mesh::structured_box(10 * f, 5 * f, f, Vec3(L, W, T));
  std::vector<bool> remove(box.elements.size(), false);
  for (int e = 0; e < box.num_elements(); ++e) {
    const Vec3 c = mesh::tet_geometry(box, e).centroid;
    const bool in_band = std::abs(c.x() - 0.5 * L) < notch_half_width;
    remove[static_cast<std::size_t>(e)] = in_band && (c.y() < notch_depth || c.y() > W - notch_depth);
  }
  MacroProblem p;
  p.mesh = remove_elements(box, remove);
  const auto left = nodes_where(p.mesh, 0, 0.0);
  const auto right = nodes_where(p.mesh, 0, L);
  p.dirichlet = {
      {"left_x", left, 0, 0.0},  {"left_y", left, 1, 0.0},  {"left_z", left, 2, 0.0},
      {"right_x", right, 0, 1.0}, {"right_y", right, 1, 0.0}, {"right_z", right, 2, 0.0},
  };
  p.schedule = std::move(schedule);
  p.driven = "right_x";
  p.set_binding(Binding::mono);
  p.macro_damage = true;
  return p;
}

}  // namespace pcrnn::macro
