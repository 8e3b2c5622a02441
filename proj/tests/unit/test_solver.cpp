#include "nlobc/error.hpp"
#include "nlobc/solver.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace nlobc;

namespace {

const double pi = std::numbers::pi;

Point P(double a, double b) { return make_point({a, b}); }

LinearRecord linear(double a, double A, ScalarField f, double lam = 1.0) {
  LinearRecord r;
  r.a = a;
  if (A != 0.0) {
    r.A = [A](const Point& x) { return SquareMatrix(A * SquareMatrix::Identity(x.size(), x.size())); };
  }
  r.lambda = constant_field(lam);
  r.f = std::move(f);
  return r;
}

LevyModel fractional(double alpha) {
  LevyModel m;
  m.measure = FractionalLaplacian{alpha, 0.0};
  return m;
}

Problem cos_problem(double h, BcMode mode, double a = 0.0) {
  const Domain d = Domain::interval(0, pi);
  GridOptions go;
  go.h = h;
  go.margin = 1.0;
  SolverConfig cfg;
  cfg.bc_mode = mode;
  std::optional<LevyModel> lm;
  if (a != 0.0) lm = fractional(1.0);
  return Problem::make(d, go, Nonlinearity::linear(linear(a, 1.0, [](const Point& x) { return std::cos(x(0)); }), 1.0),
                       lm, ObliqueField::normal(d), cfg);
}

double closure_error(const Problem& p, const Eigen::VectorXd& u, const ScalarField& exact) {
  double e = 0.0;
  for (int i = 0; i < p.grid->size(); ++i) {
    if (p.in_closure(i)) e = std::max(e, std::abs(u[i] - exact(p.grid->node(i))));
  }
  return e;
}

double sup_closure(const Problem& p, const Eigen::VectorXd& u) {
  return closure_error(p, u, constant_field(0.0));
}

Problem ball_problem(double h, BcMode mode, ScalarField f, std::optional<ScalarField> g = std::nullopt,
                     bool oblique = false) {
  const Domain d = Domain::ball(P(0, 0), 1.0);
  GridOptions go;
  go.h = h;
  go.margin = 0.6;
  SolverConfig cfg;
  cfg.bc_mode = mode;
  LevyModel lm = fractional(1.0);
  lm.delta = 0.2;
  ObliqueField fld = ObliqueField::normal(d, g);
  if (oblique) {
    fld.gamma = [](const Point& x) {
      const Point n = x / x.norm();
      Point v(2);
      v << n(0) - 0.3 * n(1), n(1) + 0.3 * n(0);
      return Point(v / v.norm());
    };
    fld.is_normal = false;
    fld.nu = 1.0 / std::sqrt(1.09);
  }
  return Problem::make(d, go, Nonlinearity::linear(linear(1.0, 0.0, std::move(f)), 1.0), lm, fld, cfg);
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("residual examples") {
  // Zero solves the homogeneous problem.
  for (BcMode mode : {BcMode::Penalized, BcMode::DirectExtension}) {
    const Problem p = ball_problem(0.1, mode, constant_field(0.0));
    const Eigen::VectorXd r = discretize_residual(p, 0.25, Eigen::VectorXd::Zero(p.grid->size()));
    CHECK(r.cwiseAbs().maxCoeff() == 0.0);
  }
  // M_F / lambda0 is a discrete supersolution; penalized rows carry F at every node.
  const Problem q = ball_problem(0.1, BcMode::Penalized, [](const Point& x) { return std::sin(3 * x(0)); });
  const double MF = compute_MF(q.nl, *q.grid, true);
  const Eigen::VectorXd r = discretize_residual(q, 0.25, Eigen::VectorXd::Constant(q.grid->size(), MF));
  CHECK(r.minCoeff() >= -1e-12);
}

TEST_CASE("residual of the sampled closed form is second order") {
  std::vector<double> res;
  for (int n : {64, 128, 256}) {
    const Problem p = cos_problem(pi / n, BcMode::DirectExtension);
    const Eigen::VectorXd u = p.grid->sample([](const Point& x) { return oracle::cos_neumann(x(0)); });
    const Eigen::VectorXd r = discretize_residual(p, 0.0, u);
    double m = 0.0;
    for (int i = 0; i < p.grid->size(); ++i) {
      if (p.grid->node_class(i) == NodeClass::Interior) m = std::max(m, std::abs(r[i]));
    }
    res.push_back(m);
  }
  CHECK(std::log2(res[0] / res[1]) >= 1.9);
  CHECK(std::log2(res[1] / res[2]) >= 1.9);
}

TEST_CASE("constants are exact") {
  for (BcMode mode : {BcMode::Penalized, BcMode::DirectExtension}) {
    const Problem p = ball_problem(0.1, mode, constant_field(2.0 * 1.0));
    const Solution s = solve(p);
    REQUIRE(s.converged);
    CHECK((s.values.array() - 2.0).abs().maxCoeff() <= 1e-8);
  }
  const Domain d = Domain::interval(0, 1);
  GridOptions go;
  go.h = 1.0 / 64;
  SolverConfig cfg;
  const Problem p = Problem::make(d, go, Nonlinearity::linear(linear(1.0, 0.0, constant_field(1.0)), 1.0),
                                  fractional(1.0), ObliqueField::normal(d), cfg);
  const Solution s = solve(p);
  CHECK((s.values.array() - 1.0).abs().maxCoeff() <= 1e-8);
}

TEST_CASE("comparison for ordered data") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> U(0, 1);
  for (BcMode mode : {BcMode::Penalized, BcMode::DirectExtension}) {
    const double c1 = U(rng), c2 = U(rng);
    const ScalarField f1 = [c1](const Point& x) { return std::sin(2 * x(0) + c1) - 0.5; };
    const ScalarField f2 = [c1, c2](const Point& x) { return std::sin(2 * x(0) + c1) - 0.5 + c2 * x(1) * x(1); };
    const Solution s1 = solve(ball_problem(0.1, mode, f1));
    const Solution s2 = solve(ball_problem(0.1, mode, f2));
    CHECK((s1.values - s2.values).maxCoeff() <= 2e-8);
  }
  // Ordered flux data in oblique direct mode.
  const Solution g1 = solve(ball_problem(0.1, BcMode::DirectExtension, constant_field(0.0), constant_field(0.5), true));
  const Solution g2 = solve(ball_problem(0.1, BcMode::DirectExtension, constant_field(0.0),
                                         [](const Point& x) { return 0.5 + 0.2 * std::abs(x(0)); }, true));
  CHECK((g1.values - g2.values).maxCoeff() <= 2e-8);
}

TEST_CASE("sup bound and bound flag") {
  const Problem p = ball_problem(0.1, BcMode::Penalized, [](const Point& x) { return 3.0 * std::cos(5 * x(1)); });
  const Solution s = solve(p);
  CHECK(s.bound_checked);
  CHECK(s.bound_ok);
  CHECK(s.values.cwiseAbs().maxCoeff() <= compute_MF(p.nl, *p.grid, true) + 1e-6);
}

TEST_CASE("explicit iteration decreases the residual monotonically") {
  Problem p = cos_problem(pi / 32, BcMode::DirectExtension);
  p.config.iteration = IterationKind::Explicit;
  p.config.tol_residual = 1e-7;
  const Solution s = solve(p);
  REQUIRE(s.converged);
  for (std::size_t k = 1; k < s.residual_history.size(); ++k) {
    CHECK(s.residual_history[k] <= s.residual_history[k - 1] * (1 + 1e-12));
  }
  const Solution q = solve(cos_problem(pi / 32, BcMode::DirectExtension));
  CHECK((s.values - q.values).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("explicit iteration reports non-convergence") {
  Problem p = cos_problem(pi / 32, BcMode::DirectExtension);
  p.config.iteration = IterationKind::Explicit;
  p.config.max_iters = 5;
  try {
    solve(p);
    FAIL("expected NoConvergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoConvergence);
  }
}

TEST_CASE("kappa continuation trace decreases on the closed-form test") {
  const Solution s = solve(cos_problem(pi / 64, BcMode::Penalized));
  REQUIRE(s.kappa_trace.size() >= 3);
  for (std::size_t j = 2; j < s.kappa_trace.size(); ++j) {
    INFO("Delta_" << j - 1 << " = " << s.kappa_trace[j - 1].delta << ", Delta_" << j << " = " << s.kappa_trace[j].delta);
    CHECK(s.kappa_trace[j].delta < s.kappa_trace[j - 1].delta);
  }
}

TEST_CASE("penalized and direct modes agree") {
  const double h = pi / 64;
  const Problem pp = cos_problem(h, BcMode::Penalized);
  const Solution sp = solve(pp);
  const Solution sd = solve(cos_problem(h, BcMode::DirectExtension));
  double diff = 0.0;
  for (int i = 0; i < pp.grid->size(); ++i) {
    if (pp.in_closure(i)) diff = std::max(diff, std::abs(sp.values[i] - sd.values[i]));
  }
  const double disc = closure_error(pp, sd.values, [](const Point& x) { return oracle::cos_neumann(x(0)); });
  CHECK(diff <= 5.0 * (sp.kappa_trace.back().delta + disc));
}

TEST_CASE("far exterior nodes satisfy the flattened transport relation") {
  const Domain d = Domain::ball(P(0, 0), 1.0);
  GridOptions go;
  go.h = 0.2;
  go.margin = 3.0;
  SolverConfig cfg;
  cfg.bc_mode = BcMode::Penalized;
  ObliqueField fld = ObliqueField::normal(d, constant_field(1.0));
  fld.gamma = [](const Point& x) {
    const Point n = x / x.norm();
    Point v(2);
    v << n(0) - 0.3 * n(1), n(1) + 0.3 * n(0);
    return Point(v / v.norm());
  };
  fld.is_normal = false;
  fld.nu = 1.0 / std::sqrt(1.09);
  const Problem p = Problem::make(d, go, Nonlinearity::linear(linear(0.0, 0.5, constant_field(0.0)), 1.0),
                                  std::nullopt, fld, cfg);
  const double kappa = 0.25;
  const Discretization disc = discretize(p, kappa);
  const Solution s = solve_fixed_point(p, disc, nullptr, kappa);
  REQUIRE(s.converged);
  const Grid& g = *p.grid;
  int checked = 0;
  for (int i = 0; i < g.size(); ++i) {
    const Point x = g.node(i);
    if (x.norm() < 3.2 || d.truncated_distance(x) < 1.0) continue;
    bool interior = true;
    for (int a = 0; a < 2; ++a) interior = interior && g.neighbor(i, a, -1) >= 0 && g.neighbor(i, a, 1) >= 0;
    if (!interior) continue;
    const Point gam = fld.gamma(x);
    double gdu = 0.0;
    for (int a = 0; a < 2; ++a) {
      const int j = gam(a) > 0 ? g.neighbor(i, a, -1) : g.neighbor(i, a, 1);
      gdu += gam(a) * (gam(a) > 0 ? s.values[i] - s.values[j] : s.values[j] - s.values[i]) / g.h();
    }
    CHECK(std::abs(p.nl.lambda0() * s.values[i] + (gdu - 1.0) / kappa) <= 1e-6);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("direct mode exterior values follow the flow") {
  const Domain d = Domain::ball(P(0, 0), 1.0);
  for (double gval : {0.0, 1.0}) {
    const Problem p = ball_problem(0.1, BcMode::DirectExtension, [](const Point& x) { return x(0); },
                                   constant_field(gval));
    const Solution s = solve(p);
    double worst = 0.0;
    for (int i = 0; i < p.grid->size(); ++i) {
      if (p.in_closure(i)) continue;
      const Point y = p.grid->node(i);
      const Projection pr = project(d, y);
      worst = std::max(worst, std::abs(s.values[i] - p.grid->interpolate_value(s.values, pr.point) - gval * pr.tau));
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("monotonicity violation is detected") {
  const Domain d = Domain::interval(0, 1);
  GridOptions go;
  go.h = 0.05;
  SolverConfig cfg;
  LinearRecord r = linear(0.0, 0.0, constant_field(0.0));
  r.A = [](const Point&) { return SquareMatrix(-SquareMatrix::Identity(1, 1)); };
  const Problem p = Problem::make(d, go, Nonlinearity::linear(r, 1.0), std::nullopt, ObliqueField::normal(d), cfg);
  try {
    discretize(p, 1.0);
    FAIL("expected MonotonicityViolation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MonotonicityViolation);
  }
}

TEST_CASE("definition semantics probes") {
  // Interior touching point on the closed-form test.
  const Problem p = cos_problem(pi / 64, BcMode::DirectExtension);
  const Solution s = solve(p);
  int interior = -1, exterior = -1;
  for (int i = 0; i < p.grid->size(); ++i) {
    const double x = p.grid->node(i)(0);
    if (interior < 0 && std::abs(x - 1.0) < p.grid->h()) interior = i;
    if (exterior < 0 && x > pi + 0.3) exterior = i;
  }
  REQUIRE(interior >= 0);
  REQUIRE(exterior >= 0);
  for (bool above : {true, false}) {
    const ProbeReport r = definition_semantics_probe(p, s, make_touching_probe(p, s, interior, above));
    CHECK(r.node_class == NodeClass::Interior);
    CHECK(r.satisfied);
    const ProbeReport e = definition_semantics_probe(p, s, make_touching_probe(p, s, exterior, above));
    CHECK(e.node_class == NodeClass::Exterior);
    CHECK(e.satisfied);
  }

  // Boundary touching point at a square corner.
  const Domain sq = Domain::box(P(0, 0), P(1, 1));
  GridOptions go;
  go.h = 1.0 / 16;
  go.margin = 0.5;
  go.alignment = Alignment::Vertex;
  SolverConfig cfg;
  cfg.bc_mode = BcMode::DirectExtension;
  const Problem q = Problem::make(sq, go,
                                  Nonlinearity::linear(linear(0.0, 0.2, [](const Point& x) { return x(0) + x(1); }), 1.0),
                                  std::nullopt, ObliqueField::normal(sq), cfg);
  const Solution t = solve(q);
  int corner = -1;
  for (int i = 0; i < q.grid->size(); ++i) {
    if ((q.grid->node(i) - P(1, 1)).norm() < 1e-12) corner = i;
  }
  REQUIRE(corner >= 0);
  for (bool above : {true, false}) {
    // u_h has a kink at the corner; the paraboloid needs enough curvature to touch within 3h.
    const ProbeReport r = definition_semantics_probe(q, t, make_touching_probe(q, t, corner, above, 5.0));
    CHECK(r.node_class == NodeClass::Boundary);
    CHECK(r.satisfied);
  }
}

}  // TEST_SUITE
