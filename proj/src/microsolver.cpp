#include "pcrnn/microsolver.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>

#include "pcrnn/error.hpp"
#include "projected_model.hpp"

namespace pcrnn::micro {

using constitutive::MaterialModel;
using constitutive::PointState;

Eigen::Matrix<double, 3, 6> affine_map(const Vec3& r) {
  Eigen::Matrix<double, 3, 6> G = Eigen::Matrix<double, 3, 6>::Zero();
  G(0, 0) = r.x();
  G(1, 1) = r.y();
  G(2, 2) = r.z();
  G(0, 3) = 0.5 * r.y();
  G(1, 3) = 0.5 * r.x();
  G(0, 4) = 0.5 * r.z();
  G(2, 4) = 0.5 * r.x();
  G(1, 5) = 0.5 * r.z();
  G(2, 5) = 0.5 * r.y();
  return G;
}

std::vector<Vec3> apply_affine_bc(const mesh::RveMesh& rve, const Vec6& macro_strain) {
  std::vector<Vec3> out;
  out.reserve(rve.boundary_nodes.size());
  for (int n : rve.boundary_nodes)
    out.push_back(affine_map(rve.mesh.nodes[static_cast<std::size_t>(n)] - rve.center) * macro_strain);
  return out;
}

Vec6 homogenize_stress(std::span<const Vec6> stress, std::span<const double> volume) {
  if (stress.size() != volume.size()) throw ParameterError("stress and volume counts differ");
  Vec6 sum = Vec6::Zero();
  double v = 0.0;
  for (std::size_t i = 0; i < stress.size(); ++i) {
    sum += volume[i] * stress[i];
    v += volume[i];
  }
  if (!(v > 0.0)) throw ParameterError("total volume must be positive");
  return sum / v;
}

namespace {

double contract(const Vec6& a, const Vec6& b) {
  return a.head<3>().dot(b.head<3>()) + 2.0 * a.tail<3>().dot(b.tail<3>());
}

}  // namespace

double effective_damage(const Vec6& stress, const Vec6& reference_stress, double previous) {
  const double ref = contract(reference_stress, reference_stress);
  if (std::sqrt(ref) < 1e-12) return previous;
  return std::clamp(1.0 - std::abs(contract(stress, reference_stress)) / ref, 0.0, 1.0);
}

void assemble_projection(const mesh::RveMesh& rve, const std::vector<int>& element_point, int n_points,
                         ProjectedModel& m) {
  const auto& mesh = rve.mesh;
  m.n_points = n_points;
  m.n_nodes = mesh.num_nodes();
  m.point_volume.assign(static_cast<std::size_t>(n_points), 0.0);
  m.matrix_fraction.assign(static_cast<std::size_t>(n_points), 0.0);
  m.length_scale.assign(static_cast<std::size_t>(n_points), 1.0);

  std::vector<mesh::TetGeometry> geo;
  geo.reserve(mesh.elements.size());
  double total = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    geo.push_back(mesh::tet_geometry(mesh, e));
    const std::size_t p = static_cast<std::size_t>(element_point[static_cast<std::size_t>(e)]);
    m.point_volume[p] += geo.back().volume;
    if (mesh.phase[static_cast<std::size_t>(e)] == mesh::kMatrix) m.matrix_fraction[p] += geo.back().volume;
    total += geo.back().volume;
  }
  m.volume = total;
  m.length = std::cbrt(total);
  const double mean_element = total / mesh.num_elements();
  for (int p = 0; p < n_points; ++p) {
    const std::size_t pp = static_cast<std::size_t>(p);
    if (!(m.point_volume[pp] > 0.0)) throw ParameterError("empty integration point");
    m.matrix_fraction[pp] /= m.point_volume[pp];
    m.length_scale[pp] = std::cbrt(m.point_volume[pp] / mean_element);
  }

  const int n_free = static_cast<int>(std::count_if(m.free_index.begin(), m.free_index.end(),
                                                    [](int f) { return f >= 0; }));
  const int n_el = mesh.num_elements();
  m.n_elements = n_el;
  m.element_point = element_point;
  m.element_volume.resize(static_cast<std::size_t>(n_el));
  m.element_matrix.resize(static_cast<std::size_t>(n_el));
  std::vector<Eigen::Triplet<double>> trip;
  m.P_el = Eigen::Matrix<double, Eigen::Dynamic, 6>::Zero(6 * n_el, 6);
  for (int e = 0; e < n_el; ++e) {
    const std::size_t ee = static_cast<std::size_t>(e);
    m.element_volume[ee] = geo[ee].volume;
    m.element_matrix[ee] = mesh.phase[ee] == mesh::kMatrix ? 1 : 0;
    const mesh::BMatrix B = mesh::strain_displacement(geo[ee].grads);
    for (int i = 0; i < 4; ++i) {
      const int node = mesh.elements[ee][static_cast<std::size_t>(i)];
      const int f = m.free_index[static_cast<std::size_t>(node)];
      if (f >= 0) {
        for (int r = 0; r < 6; ++r)
          for (int c = 0; c < 3; ++c)
            if (B(r, 3 * i + c) != 0.0) trip.emplace_back(6 * e + r, 3 * f + c, B(r, 3 * i + c));
      } else {
        const Vec3 rel = mesh.nodes[static_cast<std::size_t>(node)] - rve.center;
        m.P_el.block<6, 6>(6 * e, 0) += B.middleCols<3>(3 * i) * affine_map(rel);
      }
    }
  }
  Eigen::SparseMatrix<double> B_el(6 * n_el, 3 * n_free);
  B_el.setFromTriplets(trip.begin(), trip.end());
  m.A_el = B_el * m.Phi;
  m.A_el.makeCompressed();

  // Point averages over matrix elements (or all elements of a pure-void point).
  std::vector<Eigen::Triplet<double>> avg;
  for (int e = 0; e < n_el; ++e) {
    const std::size_t ee = static_cast<std::size_t>(e);
    const std::size_t p = static_cast<std::size_t>(element_point[ee]);
    const bool counts = m.matrix_fraction[p] > 0.0 ? m.element_matrix[ee] != 0 : true;
    if (!counts) continue;
    const double denom = m.matrix_fraction[p] > 0.0 ? m.matrix_fraction[p] * m.point_volume[p] : m.point_volume[p];
    const double w = geo[ee].volume / denom;
    for (int r = 0; r < 6; ++r) avg.emplace_back(6 * static_cast<int>(p) + r, 6 * e + r, w);
  }
  Eigen::SparseMatrix<double> Avg(6 * n_points, 6 * n_el);
  Avg.setFromTriplets(avg.begin(), avg.end());
  m.A = Avg * m.A_el;
  m.A.makeCompressed();
  m.P = Avg * m.P_el;

  m.free_affine.resize(3 * n_free, 6);
  m.boundary_map.clear();
  for (int n = 0; n < mesh.num_nodes(); ++n) {
    const int f = m.free_index[static_cast<std::size_t>(n)];
    const Eigen::Matrix<double, 3, 6> G = affine_map(mesh.nodes[static_cast<std::size_t>(n)] - rve.center);
    if (f >= 0) m.free_affine.middleRows<3>(3 * f) = G;
  }
  for (int n : m.boundary_nodes) m.boundary_map.push_back(affine_map(mesh.nodes[static_cast<std::size_t>(n)] - rve.center));
}

namespace {

void mark_boundary(const mesh::RveMesh& rve, ProjectedModel& m) {
  m.free_index.assign(static_cast<std::size_t>(rve.mesh.num_nodes()), 0);
  for (int n : rve.boundary_nodes) m.free_index[static_cast<std::size_t>(n)] = -1;
  int next = 0;
  for (int& f : m.free_index)
    if (f >= 0) f = next++;
  m.boundary_nodes = rve.boundary_nodes;
}

}  // namespace

struct RveSolver::Cache {
  std::vector<double> weights;  // per-point tangent scalars of the current factorization
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool valid = false;
};

RveSolver::RveSolver(std::shared_ptr<const ProjectedModel> model, const MaterialModel& material,
                     const SolverOptions& options)
    : model_(std::move(model)), material_(material), options_(options), cache_(std::make_unique<Cache>()) {
  material_.validate();
}

RveSolver::RveSolver(const RveSolver& other)
    : model_(other.model_), material_(other.material_), options_(other.options_),
      cache_(std::make_unique<Cache>()) {}

RveSolver& RveSolver::operator=(const RveSolver& other) {
  if (this != &other) {
    model_ = other.model_;
    material_ = other.material_;
    options_ = other.options_;
    cache_ = std::make_unique<Cache>();
  }
  return *this;
}

RveSolver::RveSolver(RveSolver&&) noexcept = default;
RveSolver& RveSolver::operator=(RveSolver&&) noexcept = default;
RveSolver::~RveSolver() = default;

RveSolver RveSolver::full(const mesh::RveMesh& rve, const MaterialModel& material, const SolverOptions& options) {
  rve.mesh.validate();
  if (rve.boundary_nodes.empty()) throw ParameterError("RVE has no boundary nodes");
  auto m = std::make_shared<ProjectedModel>();
  mark_boundary(rve, *m);
  const int n_free = rve.mesh.num_nodes() - static_cast<int>(rve.boundary_nodes.size());
  m->n_unknowns = 3 * n_free;
  m->Phi.resize(3 * n_free, 3 * n_free);
  m->Phi.setIdentity();
  std::vector<int> element_point(rve.mesh.elements.size());
  for (std::size_t e = 0; e < element_point.size(); ++e) element_point[e] = static_cast<int>(e);
  assemble_projection(rve, element_point, rve.mesh.num_elements(), *m);
  return RveSolver(std::move(m), material, options);
}

MicroState RveSolver::initial_state() const {
  MicroState s;
  s.x = Eigen::VectorXd::Zero(model_->n_unknowns);
  s.points.assign(static_cast<std::size_t>(model_->n_points), PointState{});
  return s;
}

int RveSolver::num_points() const { return model_->n_points; }
int RveSolver::num_unknowns() const { return model_->n_unknowns; }
bool RveSolver::is_reduced() const { return model_->reduced; }
double RveSolver::volume() const { return model_->volume; }
const std::vector<double>& RveSolver::point_volumes() const { return model_->point_volume; }

Eigen::VectorXd RveSolver::displacement(const MicroState& state) const {
  const ProjectedModel& m = *model_;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(3 * m.n_nodes);
  const Eigen::VectorXd free = m.Phi * state.x;
  for (int n = 0; n < m.n_nodes; ++n) {
    const int f = m.free_index[static_cast<std::size_t>(n)];
    if (f >= 0) u.segment<3>(3 * n) = free.segment<3>(3 * f);
  }
  for (std::size_t b = 0; b < m.boundary_nodes.size(); ++b)
    u.segment<3>(3 * m.boundary_nodes[b]) = m.boundary_map[b] * state.macro_strain;
  return u;
}

StepResult RveSolver::solve_step(const Vec6& E, double dt, const MicroState& state, MicroState& next) const {
  try {
    return attempt(E, dt, state, next);
  } catch (const SolverError&) {
    if (!options_.allow_refinement) throw;
  }
  MicroState half;
  attempt(0.5 * (state.macro_strain + E), 0.5 * dt, state, half);
  StepResult out = attempt(E, 0.5 * dt, half, next);
  out.refined = true;
  // The Hill-Mandel identity holds for any admissible increment, so report it over the whole step.
  out.hill_mandel = hill_mandel_gap(state, next, out);
  return out;
}

StepResult RveSolver::attempt(const Vec6& E, double dt, const MicroState& state, MicroState& next) const {
  const ProjectedModel& m = *model_;
  const int P = m.n_points;
  const int N = m.n_elements;
  const Mat6 C = constitutive::elastic_stiffness(material_);
  const double rho = options_.void_stiffness_scale;

  // Strain-independent parts of the explicit stress, per point.
  std::vector<Vec6> offset(static_cast<std::size_t>(P), Vec6::Zero());
  std::vector<double> keep(static_cast<std::size_t>(P), 1.0);
  for (int p = 0; p < P; ++p) {
    const std::size_t pp = static_cast<std::size_t>(p);
    if (m.matrix_fraction[pp] > 0.0) {
      constitutive::DamageSettings dmg{true, material_.char_length * m.length_scale[pp]};
      const auto pred = constitutive::hybrid_predict(Vec6::Zero(), dt, state.points[pp], material_, dmg);
      offset[pp] = state.points[pp].plastic_strain + pred.extrapolated_plastic_increment;
      // Residual stiffness keeps fully damaged points from leaving floating nodes.
      keep[pp] = std::max(1.0 - pred.explicit_damage, options_.stabilization);
    }
  }
  std::vector<double> weights(static_cast<std::size_t>(N));
  for (int e = 0; e < N; ++e) {
    const std::size_t ee = static_cast<std::size_t>(e);
    weights[ee] = m.element_volume[ee] *
                  (m.element_matrix[ee] ? keep[static_cast<std::size_t>(m.element_point[ee])] : rho);
  }

  Cache& cache = *cache_;
  if (!cache.valid || cache.weights != weights) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(36 * N));
    for (int e = 0; e < N; ++e)
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
          if (C(i, j) != 0.0) trip.emplace_back(6 * e + i, 6 * e + j, weights[static_cast<std::size_t>(e)] * C(i, j));
    Eigen::SparseMatrix<double> M(6 * N, 6 * N);
    M.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseMatrix<double> K = Eigen::SparseMatrix<double>(m.A_el.transpose()) * (M * m.A_el);
    if (m.reduced) {
      // Modes that leave every element strain unchanged carry no stiffness.
      const double delta = 1e-12 * K.diagonal().cwiseAbs().maxCoeff();
      for (int i = 0; i < K.rows(); ++i) K.coeffRef(i, i) += delta;
    }
    cache.ldlt.compute(K);
    if (cache.ldlt.info() != Eigen::Success) {
      cache.valid = false;
      throw NumericalError("RVE stiffness factorization failed");
    }
    cache.weights = weights;
    cache.valid = true;
  }

  Eigen::VectorXd x = state.x;
  if (!m.reduced) x += m.free_affine * (E - state.macro_strain);

  StepResult out;
  out.element_stress.assign(static_cast<std::size_t>(N), Vec6::Zero());
  Eigen::VectorXd eps;
  Eigen::VectorXd force(6 * N);
  bool converged = false;
  for (int it = 0; it <= options_.max_iterations; ++it) {
    eps = m.A_el * x + m.P_el * E;
    double scale = 0.0;
    for (int e = 0; e < N; ++e) {
      const std::size_t ee = static_cast<std::size_t>(e);
      const std::size_t pp = static_cast<std::size_t>(m.element_point[ee]);
      const Vec6 strain = eps.segment<6>(6 * e);
      const Vec6 s = m.element_matrix[ee] ? Vec6(keep[pp] * (C * (strain - offset[pp]))) : Vec6(rho * (C * strain));
      out.element_stress[ee] = s;
      force.segment<6>(6 * e) = m.element_volume[ee] * s;
      scale += m.element_volume[ee] * s.norm();
    }
    const Eigen::VectorXd R = m.A_el.transpose() * force;
    const double res = R.norm();
    scale /= m.length;
    out.residual = scale > 0.0 ? res / scale : res;
    out.iterations = it;
    if (res <= options_.tolerance * scale || res == 0.0) {
      converged = true;
      break;
    }
    if (it == options_.max_iterations) break;
    x -= cache.ldlt.solve(R);
  }
  if (!converged) throw SolverError("RVE Newton did not converge (relative residual " + std::to_string(out.residual) + ")");

  // Commit: implicit update of each point at its mean matrix strain.
  next = state;
  next.x = x;
  next.macro_strain = E;
  const Eigen::VectorXd point_eps = m.A * x + m.P * E;
  for (int p = 0; p < P; ++p) {
    const std::size_t pp = static_cast<std::size_t>(p);
    const Vec6 e = point_eps.segment<6>(6 * p);
    if (m.matrix_fraction[pp] > 0.0) {
      constitutive::DamageSettings dmg{true, material_.char_length * m.length_scale[pp]};
      constitutive::Response r = constitutive::return_map_implicit(e, state.points[pp], material_, dmg);
      r.state.prev_dt = dt;
      next.points[pp] = r.state;
    } else {
      next.points[pp].stress = rho * (C * e);
    }
  }
  Vec6 S = Vec6::Zero(), S0 = Vec6::Zero();
  out.point_stress.assign(static_cast<std::size_t>(P), Vec6::Zero());
  for (int e = 0; e < N; ++e) {
    const std::size_t ee = static_cast<std::size_t>(e);
    const std::size_t pp = static_cast<std::size_t>(m.element_point[ee]);
    const Vec6 strain = eps.segment<6>(6 * e);
    const Vec6 s0 = m.element_matrix[ee] ? Vec6(C * (strain - offset[pp])) : Vec6(rho * (C * strain));
    const double v = m.element_volume[ee];
    S += v * out.element_stress[ee];
    S0 += v * s0;
    out.point_stress[pp] += (v / m.point_volume[pp]) * out.element_stress[ee];
  }
  out.stress = S / m.volume;
  out.reference_stress = S0 / m.volume;
  out.raw_damage = effective_damage(out.stress, out.reference_stress, state.damage);
  out.damage = std::max(out.raw_damage, state.damage);
  if (out.raw_damage < state.damage) ++next.damage_corrections;
  next.damage = out.damage;
  out.hill_mandel = hill_mandel_gap(state, next, out);
  return out;
}

double RveSolver::hill_mandel_gap(const MicroState& before, const MicroState& after, const StepResult& r) const {
  const ProjectedModel& m = *model_;
  const Vec6 dE = after.macro_strain - before.macro_strain;
  const Eigen::VectorXd deps = m.A_el * (after.x - before.x) + m.P_el * dE;
  double rhs = 0.0;
  for (int e = 0; e < m.n_elements; ++e)
    rhs += m.element_volume[static_cast<std::size_t>(e)] *
           r.element_stress[static_cast<std::size_t>(e)].dot(deps.segment<6>(6 * e));
  rhs /= m.volume;
  const double scale = std::max(r.stress.norm() * dE.norm(), 1e-30);
  return std::abs(r.stress.dot(dE) - rhs) / scale;
}

}  // namespace pcrnn::micro
