#pragma once

// Macroscale finite elements (linear tetrahedra, one integration point each)
// driven by prescribed displacements. Each integration point is bound to one
// of three constitutive sources:
//  * surrogate:   the recurrent surrogate, queried with the converged strain
//                 history plus the current iterate (replicate padding),
//  * mechanistic: an RVE solve at every point (benchmark mode),
//  * mono:        J2 plasticity with the closed-form macro damage law,
//                 integrated with the hybrid explicit-implicit scheme.
// Lengths are in mm, stresses in MPa, forces in N.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pcrnn/constitutive.hpp"
#include "pcrnn/mesh.hpp"
#include "pcrnn/microsolver.hpp"
#include "pcrnn/surrogate/model.hpp"

namespace pcrnn::macro {

enum class Binding { surrogate, mechanistic, mono };

Binding parse_binding(const std::string& name);
std::string binding_name(Binding b);

/// Displacement component `component` of every node in the set equals
/// scale * schedule[step - 1].
struct DirichletSet {
  std::string name;
  std::vector<int> nodes;
  int component = 0;
  double scale = 0.0;
};

struct MacroProblem {
  mesh::TetMesh mesh;
  std::vector<DirichletSet> dirichlet;
  std::vector<double> schedule;  // prescribed magnitude d at steps 1..n
  std::string driven;            // set whose reaction forms the load-displacement curve
  std::vector<Binding> binding;  // per element
  double nonlocal_length = 0.0;  // l_d; 0 disables averaging
  bool nonlocal_multiscale = true;  // also average surrogate and RVE damage
  bool macro_damage = true;         // damage law on mono points
  double tolerance = 1e-6;
  int max_iterations = 25;

  int num_steps() const { return static_cast<int>(schedule.size()); }
  void set_binding(Binding b) { binding.assign(mesh.elements.size(), b); }
  void validate() const;
};

/// Constitutive sources shared by all points.
struct Models {
  constitutive::MaterialModel material;
  const surrogate::SurrogateModel* surrogate = nullptr;
  const micro::RveSolver* rve = nullptr;
  double surrogate_fd_step = 1e-6;  // central differences
  double rve_fd_step = 1e-5;        // forward differences
};

// ---- non-local averaging -------------------------------------------------

/// Row-normalized bell weights <1 - 4 d^2 / l_d^2>^2 V_j over points within l_d / 2.
Eigen::SparseMatrix<double, Eigen::RowMajor> nonlocal_weights(std::span<const Vec3> points,
                                                              std::span<const double> volumes,
                                                              double length);

/// Unnormalized bell weight at distance d.
double bell_weight(double distance, double length);

Eigen::VectorXd nonlocal_damage(const Eigen::VectorXd& local,
                                const Eigen::SparseMatrix<double, Eigen::RowMajor>& weights);

// ---- surrogate queries ---------------------------------------------------

struct QueryResult {
  Vec6 stress = Vec6::Zero();
  Vec6 reference_stress = Vec6::Zero();
  double damage = 0.0;
  std::vector<Eigen::VectorXd> hidden_before;  // per layer, entering step i (zero at i = 1)
};

/// Padded input {E_1^c .. E_{i-1}^c, E_i^j, (n_load - i) copies of E_i^j},
/// one full forward pass, outputs read at position i = converged.size() + 1.
QueryResult surrogate_query(const surrogate::SurrogateModel& model, std::span<const Vec6> converged,
                            const Vec6& iterate);

/// The padded input used by surrogate_query.
surrogate::PathMatrix padded_input(int n_load, std::span<const Vec6> converged, const Vec6& iterate);

// ---- solver ----------------------------------------------------------------

struct StepRecord {
  int step = 0;
  double displacement = 0.0;  // schedule value
  double reaction = 0.0;      // sum of internal forces on the driven set, in its component
  int iterations = 0;         // linear solves of the accepted attempt
  double residual = 0.0;      // relative
  bool bisected = false;
  double balance = 0.0;       // |sum of constrained nodal forces| relative to the force scale
  bool hidden_constant = true;  // surrogate state entering the step never changed
};

struct FieldFrame {
  int step = 0;
  Eigen::VectorXd displacement;   // 3 per node
  std::vector<double> von_mises;  // per element
  std::vector<double> damage;     // per element, after averaging
  std::vector<Vec6> strain;       // per element
};

struct MacroResult {
  std::vector<StepRecord> steps;
  std::vector<FieldFrame> frames;
};

struct SolveOptions {
  bool keep_frames = true;
  bool allow_bisection = true;
  int workers = 1;
};

/// Load-stepped Newton solve. Throws SolverError (with step and residual) when
/// a step fails after one bisection.
MacroResult newton_solve(const MacroProblem& problem, const Models& models, const SolveOptions& options = {});

/// step,displacement,reaction,iterations,residual CSV.
std::string reaction_csv(const MacroResult& result);

/// Legacy ASCII VTK unstructured grid with displacement, von Mises stress and damage.
std::string vtk_frame(const mesh::TetMesh& mesh, const FieldFrame& frame);

// ---- fixtures ----------------------------------------------------------------

/// Unit right tetrahedron loaded in uniaxial stress along x through node 1.
/// Analytic elastic reaction: E * d / 6.
MacroProblem one_element_problem(std::vector<double> schedule);

/// Cube of edge `size` split into 12 tetrahedra, uniaxial stress along z with
/// minimal lateral constraints. Analytic elastic reaction: E * size * d.
MacroProblem cube_problem(double size, std::vector<double> schedule);

/// Bar 20 x 10 x 2 with symmetric side notches at mid-length, clamped at x = 0
/// and pulled along x at x = 20. Level 0 has 2 mm cells; each level halves them.
MacroProblem notched_bar_problem(int level, std::vector<double> schedule);

/// Drops elements matching `remove` and the nodes no element uses.
mesh::TetMesh remove_elements(const mesh::TetMesh& mesh, const std::vector<bool>& remove);

}  // namespace pcrnn::macro
