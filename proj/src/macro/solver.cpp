#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include <Eigen/SparseLU>

#include "pcrnn/error.hpp"
#include "pcrnn/macro.hpp"
#include "pcrnn/util.hpp"

namespace pcrnn::macro {

Binding parse_binding(const std::string& name) {
  if (name == "surrogate") return Binding::surrogate;
  if (name == "mechanistic" || name == "benchmark") return Binding::mechanistic;
  if (name == "mono") return Binding::mono;
  throw ParameterError("unknown binding '" + name + "'");
}

std::string binding_name(Binding b) {
  switch (b) {
    case Binding::surrogate: return "surrogate";
    case Binding::mechanistic: return "mechanistic";
    case Binding::mono: return "mono";
  }
  return "?";
}

void MacroProblem::validate() const {
  mesh.validate();
  if (schedule.empty()) throw ParameterError("problem has no load steps");
  if (!(tolerance > 0.0)) throw ParameterError("convergence tolerance must be positive");
  if (max_iterations < 1) throw ParameterError("max_iterations must be positive");
  if (nonlocal_length < 0.0) throw ParameterError("non-local length must be non-negative");
  if (binding.size() != mesh.elements.size()) throw ParameterError("binding must list every element");
  bool found = false;
  for (const auto& s : dirichlet) {
    if (s.component < 0 || s.component > 2) throw ParameterError("Dirichlet component must be 0, 1 or 2");
    for (int n : s.nodes)
      if (n < 0 || n >= mesh.num_nodes()) throw ParameterError("Dirichlet node out of range in set " + s.name);
    found = found || s.name == driven;
  }
  if (!found) throw ParameterError("driven set '" + driven + "' is not a Dirichlet set");
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct IpState {
  surrogate::StepState step;
  std::vector<Vec6> converged;
  std::optional<micro::RveSolver> rve;
  micro::MicroState micro;
  constitutive::PointState point;
  double local_damage = 0.0;
};

struct IpEval {
  Vec6 stress = Vec6::Zero();     // local damaged stress
  Vec6 reference = Vec6::Zero();  // undamaged stress
  double damage = 0.0;            // local damage
  Mat6 tangent = Mat6::Zero();    // of `stress`, or of `reference` when averaged
  surrogate::StepState step_next;
  micro::MicroState micro_next;
  bool hidden_constant = true;
};

struct Attempt {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd f_int;
  std::vector<IpEval> evals;
  std::vector<Vec6> stress;   // final stresses used in assembly
  std::vector<Vec6> strain;
  Eigen::VectorXd damage;     // damage used in assembly
};

class Driver {
 public:
  Driver(const MacroProblem& problem, const Models& models, const SolveOptions& options)
      : p_(problem), models_(models), opt_(options) {
    p_.validate();
    models_.material.validate();
    C_ = constitutive::elastic_stiffness(models_.material);
    const int ne = p_.mesh.num_elements();
    const int ndof = 3 * p_.mesh.num_nodes();
    B_.resize(static_cast<std::size_t>(ne));
    vol_.resize(static_cast<std::size_t>(ne));
    std::vector<Vec3> centroids(static_cast<std::size_t>(ne));
    for (int e = 0; e < ne; ++e) {
      const auto g = mesh::tet_geometry(p_.mesh, e);
      B_[static_cast<std::size_t>(e)] = mesh::strain_displacement(g.grads);
      vol_[static_cast<std::size_t>(e)] = g.volume;
      centroids[static_cast<std::size_t>(e)] = g.centroid;
    }
    has_surrogate_ = std::count(p_.binding.begin(), p_.binding.end(), Binding::surrogate) > 0;
    const bool has_rve = std::count(p_.binding.begin(), p_.binding.end(), Binding::mechanistic) > 0;
    if (has_surrogate_) {
      if (!models_.surrogate) throw ParameterError("surrogate binding without a surrogate model");
      if (p_.num_steps() + 1 > models_.surrogate->n_load)
        throw CapacityError("problem has " + std::to_string(p_.num_steps()) +
                            " steps plus the initial state but the surrogate sequence length is " +
                            std::to_string(models_.surrogate->n_load));
    }
    if (has_rve && !models_.rve) throw ParameterError("mechanistic binding without an RVE solver");

    averaging_ = p_.nonlocal_length > 0.0;
    if (averaging_) weights_ = nonlocal_weights(centroids, vol_, p_.nonlocal_length);
    averaged_.resize(static_cast<std::size_t>(ne));
    for (int e = 0; e < ne; ++e) {
      const Binding b = p_.binding[static_cast<std::size_t>(e)];
      averaged_[static_cast<std::size_t>(e)] = averaging_ && (b == Binding::mono || p_.nonlocal_multiscale);
    }

    ips_.resize(static_cast<std::size_t>(ne));
    for (int e = 0; e < ne; ++e) {
      IpState& ip = ips_[static_cast<std::size_t>(e)];
      switch (p_.binding[static_cast<std::size_t>(e)]) {
        case Binding::surrogate: {
          // Sequences start from the unstrained state, so load step i sits at position i + 1.
          surrogate::advance(*models_.surrogate, surrogate::initial_step_state(*models_.surrogate), Vec6::Zero(),
                             ip.step);
          ip.converged.assign(1, Vec6::Zero());
          break;
        }
        case Binding::mechanistic:
          ip.rve.emplace(*models_.rve);
          ip.micro = ip.rve->initial_state();
          break;
        case Binding::mono: break;
      }
    }

    // Prescribed dofs.
    prescribed_scale_.assign(static_cast<std::size_t>(ndof), std::numeric_limits<double>::quiet_NaN());
    for (const auto& s : p_.dirichlet)
      for (int n : s.nodes) {
        double& v = prescribed_scale_[static_cast<std::size_t>(3 * n + s.component)];
        if (!std::isnan(v) && v != s.scale)
          throw ParameterError("conflicting Dirichlet values at node " + std::to_string(n));
        v = s.scale;
      }
    free_index_.assign(static_cast<std::size_t>(ndof), -1);
    for (int d = 0; d < ndof; ++d)
      if (std::isnan(prescribed_scale_[static_cast<std::size_t>(d)])) {
        free_index_[static_cast<std::size_t>(d)] = n_free_;
        free_dofs_.push_back(d);
        ++n_free_;
      }
    u_ = Eigen::VectorXd::Zero(ndof);
  }

  MacroResult run() {
    MacroResult result;
    double d_prev = 0.0;
    for (int i = 1; i <= p_.num_steps(); ++i) {
      const double d = p_.schedule[static_cast<std::size_t>(i - 1)];
      StepRecord rec;
      rec.step = i;
      rec.displacement = d;
      Attempt a = solve_to(d, u_, 1.0);
      if (!a.converged && opt_.allow_bisection) {
        rec.bisected = true;
        const double mid = 0.5 * (d_prev + d);
        Attempt half = solve_to(mid, u_, 0.5);
        if (half.converged) {
          if (has_surrogate_) {
            // Surrogate histories advance one entry per load step, so the
            // midpoint only serves as the starting guess.
            a = solve_to(d, half.u, 1.0);
          } else {
            commit(half, 0.5);
            a = solve_to(d, half.u, 0.5);
          }
        }
      }
      if (!a.converged) {
        std::ostringstream msg;
        msg << "macro Newton failed at step " << i << " (d = " << d << ", relative residual " << a.residual
            << " after " << a.iterations << " iterations)";
        throw SolverError(msg.str());
      }
      rec.iterations = a.iterations;
      rec.residual = a.residual;
      rec.hidden_constant = std::all_of(a.evals.begin(), a.evals.end(),
                                        [](const IpEval& e) { return e.hidden_constant; }) &&
                            hidden_constant_;
      commit(a, rec.bisected && !has_surrogate_ ? 0.5 : 1.0);
      rec.reaction = reaction(a.f_int);
      rec.balance = balance(a.f_int);
      result.steps.push_back(rec);
      if (opt_.keep_frames) result.frames.push_back(frame(i, a));
      d_prev = d;
    }
    return result;
  }

 private:
  Eigen::VectorXd element_dofs(const Eigen::VectorXd& u, int e) const {
    Eigen::Matrix<double, 12, 1> ue;
    const auto& conn = p_.mesh.elements[static_cast<std::size_t>(e)];
    for (int a = 0; a < 4; ++a)
      for (int c = 0; c < 3; ++c) ue(3 * a + c) = u(3 * conn[static_cast<std::size_t>(a)] + c);
    return ue;
  }

  IpEval evaluate(int e, const Vec6& E, double dt, const Eigen::VectorXd* step_damage) const {
    const IpState& ip = ips_[static_cast<std::size_t>(e)];
    const bool avg = averaged_[static_cast<std::size_t>(e)];
    IpEval out;
    switch (p_.binding[static_cast<std::size_t>(e)]) {
      case Binding::surrogate: {
        const auto& model = *models_.surrogate;
        const surrogate::StepOutput o = surrogate::advance(model, ip.step, E, out.step_next);
        out.stress = o.stress;
        out.reference = o.reference_stress;
        out.damage = o.damage;
        const double h = models_.surrogate_fd_step;
        for (int k = 0; k < 6; ++k) {
          Vec6 Ep = E, Em = E;
          Ep(k) += h;
          Em(k) -= h;
          surrogate::StepState scratch;
          const auto up = surrogate::advance(model, ip.step, Ep, scratch);
          const auto dn = surrogate::advance(model, ip.step, Em, scratch);
          out.tangent.col(k) = avg ? Vec6((up.reference_stress - dn.reference_stress) / (2 * h))
                                   : Vec6((up.stress - dn.stress) / (2 * h));
        }
        out.hidden_constant = step_entry_hidden_.empty() ||
                              ip.step.hidden == step_entry_hidden_[static_cast<std::size_t>(e)];
        break;
      }
      case Binding::mechanistic: {
        const micro::StepResult r = ip.rve->solve_step(E, dt, ip.micro, out.micro_next);
        out.stress = r.stress;
        out.reference = r.reference_stress;
        out.damage = r.damage;
        const double h = models_.rve_fd_step;
        for (int k = 0; k < 6; ++k) {
          Vec6 Ep = E;
          Ep(k) += h;
          micro::MicroState scratch;
          const micro::StepResult rp = ip.rve->solve_step(Ep, dt, ip.micro, scratch);
          out.tangent.col(k) = avg ? Vec6((rp.reference_stress - r.reference_stress) / h)
                                   : Vec6((rp.stress - r.stress) / h);
        }
        break;
      }
      case Binding::mono: {
        const auto pred = constitutive::hybrid_predict(E, dt, ip.point, models_.material, {false, 0.0});
        out.reference = pred.explicit_reference_stress;
        out.damage = (*step_damage)(e);
        out.stress = (1.0 - out.damage) * out.reference;
        out.tangent = avg ? C_ : Mat6((1.0 - out.damage) * C_);
        break;
      }
    }
    return out;
  }

  /// Extrapolated local damage of mono points for a step of length dt.
  Eigen::VectorXd mono_damage(double dt) const {
    Eigen::VectorXd D = Eigen::VectorXd::Zero(p_.mesh.num_elements());
    if (!p_.macro_damage) return D;
    for (int e = 0; e < p_.mesh.num_elements(); ++e) {
      if (p_.binding[static_cast<std::size_t>(e)] != Binding::mono) continue;
      const IpState& ip = ips_[static_cast<std::size_t>(e)];
      const double eqp = ip.point.eq_plastic_strain + (dt / ip.point.prev_dt) * ip.point.prev_eq_plastic_increment;
      D(e) = std::max(ip.local_damage, constitutive::macro_damage(eqp, models_.material));
    }
    return D;
  }

  Attempt solve_to(double d, const Eigen::VectorXd& guess, double dt) {
    const int ne = p_.mesh.num_elements();
    const int ndof = 3 * p_.mesh.num_nodes();
    Attempt a;
    a.u = guess;
    for (int k = 0; k < ndof; ++k)
      if (free_index_[static_cast<std::size_t>(k)] < 0) a.u(k) = prescribed_scale_[static_cast<std::size_t>(k)] * d;

    step_entry_hidden_.assign(static_cast<std::size_t>(ne), {});
    for (int e = 0; e < ne; ++e) step_entry_hidden_[static_cast<std::size_t>(e)] = ips_[static_cast<std::size_t>(e)].step.hidden;
    const Eigen::VectorXd step_damage = mono_damage(dt);

    Eigen::SparseLU<SparseMatrix> lu;
    bool analyzed = false;
    for (int it = 0;; ++it) {
      a.evals.assign(static_cast<std::size_t>(ne), IpEval{});
      a.strain.assign(static_cast<std::size_t>(ne), Vec6::Zero());
      for (int e = 0; e < ne; ++e)
        a.strain[static_cast<std::size_t>(e)] = B_[static_cast<std::size_t>(e)] * element_dofs(a.u, e);
      parallel_for(static_cast<std::size_t>(ne), opt_.workers, [&](std::size_t e) {
        a.evals[e] = evaluate(static_cast<int>(e), a.strain[e], dt, &step_damage);
      });
      for (const auto& ev : a.evals) hidden_constant_ = hidden_constant_ && ev.hidden_constant;

      Eigen::VectorXd local(ne);
      for (int e = 0; e < ne; ++e) local(e) = a.evals[static_cast<std::size_t>(e)].damage;
      a.damage = averaging_ ? nonlocal_damage(local, weights_) : local;
      for (int e = 0; e < ne; ++e)
        if (!averaged_[static_cast<std::size_t>(e)]) a.damage(e) = local(e);

      a.f_int = Eigen::VectorXd::Zero(ndof);
      a.stress.assign(static_cast<std::size_t>(ne), Vec6::Zero());
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(static_cast<std::size_t>(ne) * 144);
      for (int e = 0; e < ne; ++e) {
        const std::size_t es = static_cast<std::size_t>(e);
        const IpEval& ev = a.evals[es];
        Vec6 S;
        Mat6 T;
        if (averaged_[es]) {
          S = (1.0 - a.damage(e)) * ev.reference;
          T = (1.0 - a.damage(e)) * ev.tangent;
        } else {
          S = ev.stress;
          T = ev.tangent;
        }
        a.stress[es] = S;
        const auto& Be = B_[es];
        const Eigen::Matrix<double, 12, 1> fe = vol_[es] * Be.transpose() * S;
        const Eigen::Matrix<double, 12, 12> Ke = vol_[es] * Be.transpose() * T * Be;
        const auto& conn = p_.mesh.elements[es];
        for (int i = 0; i < 12; ++i) {
          const int gi = 3 * conn[static_cast<std::size_t>(i / 3)] + i % 3;
          a.f_int(gi) += fe(i);
          const int fi = free_index_[static_cast<std::size_t>(gi)];
          if (fi < 0) continue;
          for (int j = 0; j < 12; ++j) {
            const int gj = 3 * conn[static_cast<std::size_t>(j / 3)] + j % 3;
            const int fj = free_index_[static_cast<std::size_t>(gj)];
            if (fj >= 0) trip.emplace_back(fi, fj, Ke(i, j));
          }
        }
      }
      Eigen::VectorXd R(n_free_);
      for (int k = 0; k < n_free_; ++k) R(k) = a.f_int(free_dofs_[static_cast<std::size_t>(k)]);
      const double scale = std::max(a.f_int.norm(), 1e-12);
      a.residual = n_free_ > 0 ? R.norm() / scale : 0.0;
      if (a.residual <= p_.tolerance || R.norm() <= 1e-12) {
        a.converged = true;
        a.iterations = it;
        return a;
      }
      if (it >= p_.max_iterations) {
        a.iterations = it;
        return a;
      }
      SparseMatrix K(n_free_, n_free_);
      K.setFromTriplets(trip.begin(), trip.end());
      if (!analyzed) {
        lu.analyzePattern(K);
        analyzed = true;
      }
      lu.factorize(K);
      if (lu.info() != Eigen::Success) {
        a.iterations = it;
        return a;
      }
      const Eigen::VectorXd du = lu.solve(-R);
      for (int k = 0; k < n_free_; ++k) a.u(free_dofs_[static_cast<std::size_t>(k)]) += du(k);
    }
  }

  void commit(const Attempt& a, double dt) {
    u_ = a.u;
    for (int e = 0; e < p_.mesh.num_elements(); ++e) {
      const std::size_t es = static_cast<std::size_t>(e);
      IpState& ip = ips_[es];
      const Vec6& E = a.strain[es];
      switch (p_.binding[es]) {
        case Binding::surrogate:
          ip.step = a.evals[es].step_next;
          ip.converged.push_back(E);
          break;
        case Binding::mechanistic: ip.micro = a.evals[es].micro_next; break;
        case Binding::mono: {
          const auto h = constitutive::hybrid_step(E, dt, ip.point, models_.material, {false, 0.0});
          ip.point = h.implicit.state;
          if (p_.macro_damage)
            ip.local_damage =
                std::max(ip.local_damage, constitutive::macro_damage(ip.point.eq_plastic_strain, models_.material));
          break;
        }
      }
    }
  }

  double reaction(const Eigen::VectorXd& f) const {
    for (const auto& s : p_.dirichlet)
      if (s.name == p_.driven) {
        double r = 0.0;
        for (int n : s.nodes) r += f(3 * n + s.component);
        return r;
      }
    return 0.0;
  }

  double balance(const Eigen::VectorXd& f) const {
    Vec3 sum = Vec3::Zero(), mag = Vec3::Zero();
    for (int d = 0; d < f.size(); ++d)
      if (free_index_[static_cast<std::size_t>(d)] < 0) {
        sum(d % 3) += f(d);
        mag(d % 3) += std::abs(f(d));
      }
    const double ref = std::max(mag.maxCoeff(), 1e-12);
    return sum.cwiseAbs().maxCoeff() / ref;
  }

  FieldFrame frame(int step, const Attempt& a) const {
    FieldFrame f;
    f.step = step;
    f.displacement = u_;
    const int ne = p_.mesh.num_elements();
    Eigen::VectorXd D(ne);
    for (int e = 0; e < ne; ++e) {
      const std::size_t es = static_cast<std::size_t>(e);
      D(e) = p_.binding[es] == Binding::mono ? ips_[es].local_damage : a.evals[es].damage;
    }
    if (averaging_) {
      const Eigen::VectorXd avg = nonlocal_damage(D, weights_);
      for (int e = 0; e < ne; ++e)
        if (averaged_[static_cast<std::size_t>(e)]) D(e) = avg(e);
    }
    for (int e = 0; e < ne; ++e) {
      const std::size_t es = static_cast<std::size_t>(e);
      f.von_mises.push_back(voigt::von_mises(a.stress[es]));
      f.damage.push_back(D(e));
      f.strain.push_back(a.strain[es]);
    }
    return f;
  }

  MacroProblem p_;
  Models models_;
  SolveOptions opt_;
  Mat6 C_;
  std::vector<mesh::BMatrix> B_;
  std::vector<double> vol_;
  bool has_surrogate_ = false;
  bool averaging_ = false;
  std::vector<bool> averaged_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> weights_;
  std::vector<IpState> ips_;
  std::vector<double> prescribed_scale_;
  std::vector<int> free_index_;
  std::vector<int> free_dofs_;
  int n_free_ = 0;
  Eigen::VectorXd u_;
  std::vector<std::vector<Eigen::VectorXd>> step_entry_hidden_;
  bool hidden_constant_ = true;
};

}  // namespace

MacroResult newton_solve(const MacroProblem& problem, const Models& models, const SolveOptions& options) {
  return Driver(problem, models, options).run();
}

std::string reaction_csv(const MacroResult& result) {
  std::ostringstream out;
  out.precision(17);
  out << "step,displacement,reaction,iterations,residual\n";
  for (const auto& s : result.steps)
    out << s.step << ',' << s.displacement << ',' << s.reaction << ',' << s.iterations << ',' << s.residual << '\n';
  return out.str();
}

std::string vtk_frame(const mesh::TetMesh& m, const FieldFrame& f) {
  std::ostringstream out;
  out.precision(10);
  out << "# vtk DataFile Version 3.0\nstep " << f.step << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << m.num_nodes() << " double\n";
  for (const auto& p : m.nodes) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  out << "CELLS " << m.num_elements() << ' ' << 5 * m.num_elements() << '\n';
  for (const auto& c : m.elements) out << "4 " << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << c[3] << '\n';
  out << "CELL_TYPES " << m.num_elements() << '\n';
  for (int e = 0; e < m.num_elements(); ++e) out << "10\n";
  out << "POINT_DATA " << m.num_nodes() << "\nVECTORS displacement double\n";
  for (int n = 0; n < m.num_nodes(); ++n)
    out << f.displacement(3 * n) << ' ' << f.displacement(3 * n + 1) << ' ' << f.displacement(3 * n + 2) << '\n';
  out << "CELL_DATA " << m.num_elements() << "\nSCALARS von_mises double 1\nLOOKUP_TABLE default\n";
  for (double v : f.von_mises) out << v << '\n';
  out << "SCALARS damage double 1\nLOOKUP_TABLE default\n";
  for (double v : f.damage) out << v << '\n';
  return out.str();
}

}  // namespace pcrnn::macro
