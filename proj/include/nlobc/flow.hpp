#pragma once

#include "nlobc/geometry.hpp"
#include "nlobc/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nlobc {

/// Oblique direction field gamma and flux g of the exterior condition
/// gamma . Du = g on the complement of Omega, with the regularity constants
/// the solver and the validators rely on.
struct ObliqueField {
  VectorField gamma;
  ScalarField g;
  /// sup |gamma|.
  double gamma_bound = 1.0;
  /// Lipschitz constant of gamma (the one-sided constant K when one_sided).
  double lipschitz_gamma = 0.0;
  double lipschitz_g = 0.0;
  /// Lower bound of gamma . n on the boundary.
  double nu = 1.0;
  /// Constant c in tau_x <= c (1 + |x|); 0 when undeclared.
  double growth_c = 0.0;
  bool g_compact = false;
  /// gamma only satisfies the one-sided Lipschitz bound (convex corners, gamma = n).
  bool one_sided = false;
  /// gamma is the outward normal field of the domain.
  bool is_normal = false;
  /// g vanishes identically.
  bool g_zero = false;

  /// gamma = extended normal of `domain`, with the given flux (zero by default).
  static ObliqueField normal(const Domain& domain, std::optional<ScalarField> g = std::nullopt);
};

struct FlowOptions {
  /// Base RK4 step; <= 0 selects min(0.01, start_fraction dist(y)) / sup|gamma|.
  double step = 0.0;
  double start_fraction = 0.1;
  /// Event tolerance on the distance; <= 0 selects 1e-12 diam.
  double event_tol = 0.0;
  /// When > 0, far from the boundary the step grows to ratio * dist(X) / sup|gamma|.
  double distance_ratio = 0.0;
  /// Multiplier of the growth bound defining the maximal hitting time.
  double safety = 4.0;
  /// Consecutive distance increases tolerated inside the boundary band.
  int max_backtrack = 20;
  /// Explicit cap on the hitting time; overrides the growth-bound guard.
  std::optional<double> tau_max;
  /// Locate events on the cubic Hermite interpolant of the last step instead
  /// of re-integrating sub-steps.
  bool hermite_events = false;
  bool record_path = false;
};

struct PathSample {
  double t = 0.0;
  Point x;
};

struct FlowResult {
  double tau = 0.0;
  Point endpoint;
  double g_integral = 0.0;
  std::vector<PathSample> path;
  bool converged = false;
};

/// Integrates X' = -gamma(X) from y until X reaches the closure of Omega.
/// Classical RK4 with bisection of the event; the flux integral of g is
/// accumulated with Simpson's rule on the same steps. For y in the closure the
/// result is tau = 0, endpoint = y.
FlowResult integrate_flow(const ObliqueField& field, const Domain& domain, const Point& y,
                          const FlowOptions& opts = {});

struct Projection {
  Point point;
  double tau = 0.0;
};

/// Closed-form landing point y - dist(y) n(y) of the normal flow on a convex domain.
Projection project(const Domain& domain, const Point& y);

/// g integral along the flow from y plus boundary_values at the landing point.
/// Uses project() when the field is the normal of a convex domain.
double transport_extension(const ObliqueField& field, const Domain& domain,
                           const ScalarField& boundary_values, const Point& y,
                           const FlowOptions& opts = {});

/// Same decomposition as transport_extension without evaluating the
/// boundary values: the flux integral and the landing point.
struct ExtensionData {
  double g_integral = 0.0;
  Point landing;
  double tau = 0.0;
};
ExtensionData extension_data(const ObliqueField& field, const Domain& domain, const Point& y,
                             const FlowOptions& opts = {});

/// 2 tau where tau is the time for the flow from y to reach the inner level
/// set {d = delta} of the exact signed distance. y must satisfy d(y) <= delta.
double theta_time(const ObliqueField& field, const Domain& domain, double delta, const Point& y,
                  const FlowOptions& opts = {});

/// Sampled check of the field assumptions on a bounded domain.
struct FieldCheck {
  bool nu_ok = true;
  double min_gamma_dot_n = 0.0;
  bool bound_ok = true;
  double max_gamma_norm = 0.0;
  std::vector<std::string> messages;
};
FieldCheck check_field(const ObliqueField& field, const Domain& domain, int samples = 256);

}  // namespace nlobc
