#pragma once

#include "nlobc/flow.hpp"
#include "nlobc/geometry.hpp"
#include "nlobc/grid.hpp"
#include "nlobc/levy.hpp"
#include "nlobc/nonlinearity.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nlobc {

enum class BcMode { Penalized, DirectExtension };
enum class IterationKind {
  /// Howard policy iteration with sparse linear solves.
  Policy,
  /// Damped explicit iteration u <- u - rho R(u).
  Explicit,
};

const char* to_string(BcMode m);
const char* to_string(IterationKind k);

std::vector<double> default_kappa_schedule();

struct SolverConfig {
  BcMode bc_mode = BcMode::Penalized;
  std::vector<double> kappa_schedule = default_kappa_schedule();
  /// Explicit pseudo-step; <= 0 selects 1 / (largest diagonal coefficient).
  double rho = 0.0;
  double tol_residual = 1e-8;
  int max_iters = 200000;
  IterationKind iteration = IterationKind::Policy;
  /// Continuation stops once the kappa increment drops below this; <= 0 selects 10 tol_residual.
  double tol_kappa = 0.0;
  bool check_monotonicity = true;
  /// Slack in the sup-norm bound flag.
  double bound_tol = 1e-6;
  /// Flattening radius of F in oblique penalized mode; < 0 selects the default.
  double flatten_radius = -1.0;
  /// Flow options for exterior extensions (the step grows with the distance).
  FlowOptions flow = [] {
    FlowOptions f;
    f.distance_ratio = 0.25;
    f.start_fraction = 0.5;
    f.hermite_events = true;
    return f;
  }();
  int threads = 1;
};

/// Everything a solve needs. Copies share the immutable grid and quadrature table.
struct Problem {
  Domain domain = Domain::interval(0, 1);
  std::shared_ptr<const Grid> grid;
  Nonlinearity nl = Nonlinearity::linear({}, 1.0);
  std::optional<LevyModel> levy;
  std::shared_ptr<const QuadratureTable> table;
  ObliqueField field;
  SolverConfig config;

  static Problem make(const Domain& domain, const GridOptions& grid, Nonlinearity nl,
                      std::optional<LevyModel> levy, ObliqueField field, SolverConfig config);

  /// Nodes whose value carries the equation in DirectExtension mode (closure of Omega).
  bool in_closure(int node) const;
  bool oblique() const { return !field.is_normal || !field.g_zero; }
};

/// Assembled affine residual: per control k, R^k = M_k u - r_k on equation rows;
/// plus scale * (B u - c) (penalty or extension rows). R = max_k R^k + scale (B u - c).
struct Discretization {
  std::vector<Eigen::SparseMatrix<double, Eigen::RowMajor>> controls;
  std::vector<Eigen::VectorXd> rhs;
  Eigen::SparseMatrix<double, Eigen::RowMajor> boundary;
  Eigen::VectorXd boundary_rhs;
  double boundary_scale = 1.0;
  std::vector<char> carries_equation;
  BcMode mode = BcMode::Penalized;

  int size() const { return static_cast<int>(boundary_rhs.size()); }
  void set_kappa(double kappa);
  Eigen::VectorXd residual(const Eigen::VectorXd& u) const;
  /// Control attaining the maximum at every row.
  std::vector<int> policy(const Eigen::VectorXd& u) const;
  Eigen::SparseMatrix<double, Eigen::RowMajor> jacobian(const std::vector<int>& policy) const;
  double max_diagonal() const;
};

Discretization discretize(const Problem& problem, double kappa = 1.0);

/// R_h(u) for the given kappa (ignored in DirectExtension mode).
Eigen::VectorXd discretize_residual(const Problem& problem, double kappa, const Eigen::VectorXd& u);

/// Closure used for jump landings outside the box.
ExteriorClosure exterior_closure(const Problem& problem);

struct KappaStep {
  double kappa = 0.0;
  /// sup over closure nodes of |u_kappa - u_previous|; NaN for the first kappa.
  double delta = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

struct Solution {
  Eigen::VectorXd values;
  std::vector<double> residual_history;
  /// kappa in force at each history entry (0 in DirectExtension mode).
  std::vector<double> history_kappa;
  std::vector<KappaStep> kappa_trace;
  bool converged = false;
  int iterations = 0;
  double rho = 0.0;
  /// M_F / lambda0 over equation nodes; checked only when g vanishes.
  double bound = 0.0;
  bool bound_checked = false;
  bool bound_ok = true;
  std::vector<char> carries_equation;
  std::map<std::string, std::string> metadata;
};

/// Iterates to ||R_h|| <= tol_residual at fixed kappa. Throws NoConvergence
/// (the history is in the message) or StiffPenalty.
Solution solve_fixed_point(const Problem& problem, const Discretization& disc,
                           const Eigen::VectorXd* warm_start = nullptr, double kappa = 0.0);

/// Penalized solves over the kappa schedule with warm starts.
Solution continuation_in_kappa(const Problem& problem, const Eigen::VectorXd* warm_start = nullptr);

/// Equation on the closure of Omega, transport extension at exterior nodes.
Solution solve_direct(const Problem& problem, const Eigen::VectorXd* warm_start = nullptr);

/// Dispatches on config.bc_mode.
Solution solve(const Problem& problem);

/// Quadratic test function phi(x) = phi0 + p . (x - c) + 1/2 (x - c)^T Q (x - c)
/// with phi0 chosen so that phi(c) = u_h(c).
struct Probe {
  Point center;
  Point gradient;
  SquareMatrix hessian;
  /// Max of u - phi (subsolution test) when true, min (supersolution test) otherwise.
  bool from_above = true;
  /// Search radius; <= 0 selects max(c(j) delta, 3h).
  double radius = 0.0;
  double c_probe = 10.0;
};

struct ProbeReport {
  int node = -1;
  Point x;
  NodeClass node_class = NodeClass::Interior;
  std::string case_name;
  /// Equation F[u, phi] at the touching node.
  double equation_value = 0.0;
  /// Boundary functional (inf/sup over the normal cone of D phi . n, or D phi . gamma - g).
  double boundary_value = 0.0;
  double tolerance = 0.0;
  bool satisfied = false;
};

ProbeReport definition_semantics_probe(const Problem& problem, const Solution& solution,
                                       const Probe& probe);

/// Probe centered at `node` built from the discrete derivatives of u_h, with
/// `curvature` * I added (subtracted) so that u - phi has a strict local max (min).
Probe make_touching_probe(const Problem& problem, const Solution& solution, int node,
                          bool from_above, double curvature = 1.0);

}  // namespace nlobc
