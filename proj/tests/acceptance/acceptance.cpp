// Acceptance criteria 1-10: one PASS/FAIL line each, exit status 1 if any fails.

#include "nlobc/error.hpp"
#include "nlobc/flow.hpp"
#include "nlobc/mc_oracle.hpp"
#include "nlobc/solver.hpp"

#include "../support/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

using namespace nlobc;

namespace {

const double pi = std::numbers::pi;

Point P(double a, double b) { return make_point({a, b}); }

LinearRecord record(double a, double A, ScalarField f, ScalarField lambda = constant_field(1.0)) {
  LinearRecord r;
  r.a = a;
  if (A != 0.0) {
    r.A = [A](const Point& x) { return SquareMatrix(A * SquareMatrix::Identity(x.size(), x.size())); };
  }
  r.lambda = std::move(lambda);
  r.f = std::move(f);
  return r;
}

LevyModel fractional(double alpha) {
  LevyModel m;
  m.measure = FractionalLaplacian{alpha, 0.0};
  return m;
}

LevyModel truncated_fractional() {
  LevyModel m = fractional(1.0);
  m.delta = 0.2;
  m.trunc_radius = 5.0;
  return m;
}

// gamma = normalized(n + c t) on the ball, t the counterclockwise tangent.
ObliqueField rotated_field(const Domain& ball, double c, std::optional<ScalarField> g) {
  ObliqueField f = ObliqueField::normal(ball, std::move(g));
  f.gamma = [ball, c](const Point& x) {
    const Point n = ball.extended_normal(x);
    Point v(2);
    v << n(0) - c * n(1), n(1) + c * n(0);
    return Point(v / v.norm());
  };
  f.is_normal = false;
  f.one_sided = false;
  f.nu = 1.0 / std::sqrt(1.0 + c * c);
  f.g_compact = true;
  return f;
}

double sup_closure(const Problem& p, const Eigen::VectorXd& u, const ScalarField& exact) {
  double e = 0.0;
  for (int i = 0; i < p.grid->size(); ++i) {
    if (p.in_closure(i)) e = std::max(e, std::abs(u[i] - exact(p.grid->node(i))));
  }
  return e;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome constant_exactness() {
  const Domain d = Domain::interval(0, 1);
  GridOptions go;
  go.h = 1.0 / 64;
  std::ostringstream os;
  bool ok = true;
  for (BcMode mode : {BcMode::Penalized, BcMode::DirectExtension}) {
    SolverConfig cfg;
    cfg.bc_mode = mode;
    const Problem p = Problem::make(d, go, Nonlinearity::linear(record(1.0, 0.0, constant_field(1.0)), 1.0),
                                    fractional(1.0), ObliqueField::normal(d), cfg);
    const Solution s = solve(p);
    const double e = (s.values.array() - 1.0).abs().maxCoeff();
    ok = ok && s.converged && e <= 1e-7;
    os << to_string(mode) << " |u_h - 1| = " << e << "; ";
  }
  return {ok, os.str()};
}

Outcome sup_bound() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0, 1);
  std::ostringstream os;
  bool ok = true;
  double worst = -INFINITY;
  for (int k = 0; k < 10; ++k) {
    const bool planar = k >= 6;
    const Domain d = planar ? Domain::ball(P(0, 0), 1.0) : Domain::interval(0, 1);
    const double a = U(rng) < 0.5 ? 0.0 : U(rng);
    const double A = 0.5 * U(rng);
    const double lam0 = 0.5 + U(rng);
    const double c1 = 4 * U(rng), c2 = 2 * pi * U(rng), amp = 0.5 + 2 * U(rng);
    LinearRecord r = record(a, A, [=](const Point& x) { return amp * std::sin(c1 * x(0) + c2); },
                            [=](const Point& x) { return lam0 + x.squaredNorm(); });
    const double bx = U(rng) - 0.5;
    r.b = [bx](const Point& x) {
      Point v = Point::Zero(x.size());
      v(0) = bx;
      return v;
    };
    GridOptions go;
    go.h = planar ? 0.1 : 1.0 / 64;
    go.margin = planar ? 0.6 : 1.0;
    SolverConfig cfg;
    cfg.bc_mode = k % 2 ? BcMode::DirectExtension : BcMode::Penalized;
    std::optional<LevyModel> lm;
    if (a > 0) lm = planar ? truncated_fractional() : fractional(0.5 + U(rng));
    const Problem p = Problem::make(d, go, Nonlinearity::linear(r, lam0), lm, ObliqueField::normal(d), cfg);
    const Solution s = solve(p);
    // Penalized rows carry F at every node, direct rows on the closure.
    const double MF = compute_MF(p.nl, *p.grid, cfg.bc_mode == BcMode::Penalized);
    const double excess = s.values.lpNorm<Eigen::Infinity>() - MF / lam0;
    worst = std::max(worst, excess);
    ok = ok && s.converged && excess <= 1e-6;
  }
  os << "10 random linear problems, max(|u_h|_inf - M_F/lambda0) = " << worst;
  return {ok, os.str()};
}

Outcome comparison() {
  std::ostringstream os;
  bool ok = true;
  double worst = -INFINITY;
  for (int dim : {1, 2}) {
    const Domain d = dim == 1 ? Domain::interval(0, 1) : Domain::ball(P(0, 0), 1.0);
    GridOptions go;
    go.h = dim == 1 ? 1.0 / 64 : 0.1;
    go.margin = dim == 1 ? 1.0 : 0.6;
    const LevyModel lm = dim == 1 ? fractional(1.0) : truncated_fractional();
    const ScalarField f1 = [](const Point& x) { return std::cos(3 * x(0)) - 0.2; };
    const ScalarField f2 = [](const Point& x) { return std::cos(3 * x(0)) - 0.2 + 0.3 * x.squaredNorm(); };
    for (BcMode mode : {BcMode::Penalized, BcMode::DirectExtension}) {
      SolverConfig cfg;
      cfg.bc_mode = mode;
      const auto run = [&](const ScalarField& f) {
        return solve(Problem::make(d, go, Nonlinearity::linear(record(1.0, 0.1, f), 1.0), lm,
                                   ObliqueField::normal(d), cfg));
      };
      const Solution u1 = run(f1), u2 = run(f2);
      const double m = (u1.values - u2.values).maxCoeff();
      worst = std::max(worst, m);
      ok = ok && u1.converged && u2.converged && m <= 1e-6;
    }
  }
  os << "1-D and 2-D ball, both modes: max(u1 - u2) = " << worst;
  return {ok, os.str()};
}

Outcome local_order() {
  std::vector<double> err;
  for (int n : {64, 128, 256}) {
    const Domain d = Domain::interval(0, pi);
    GridOptions go;
    go.h = pi / n;
    go.margin = 1.0;
    SolverConfig cfg;
    cfg.bc_mode = BcMode::DirectExtension;
    const Problem p = Problem::make(d, go,
                                    Nonlinearity::linear(record(0.0, 1.0, [](const Point& x) { return std::cos(x(0)); }), 1.0),
                                    std::nullopt, ObliqueField::normal(d), cfg);
    const Solution s = solve(p);
    err.push_back(sup_closure(p, s.values, [](const Point& x) { return oracle::cos_neumann(x(0)); }));
  }
  const double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
  std::ostringstream os;
  os << "errors " << err[0] << ", " << err[1] << ", " << err[2] << "; orders " << o1 << ", " << o2;
  return {o1 >= 1.9 && o2 >= 1.9, os.str()};
}

Outcome quadrature_oracle() {
  const double h = 1.0 / 512;
  const Domain d = Domain::interval(-1, 1);
  GridOptions go;
  go.h = h;
  go.margin = 3.0;
  const Grid grid = Grid::build(d, go);
  const ScalarField gauss = [](const Point& x) { return std::exp(-x.squaredNorm()); };
  const ExteriorClosure exact = [gauss](const Point& y) {
    LinearForm l;
    l.constant = gauss(y);
    return l;
  };
  const Eigen::VectorXd u = grid.sample(gauss);
  double worst = 0.0;
  for (double alpha : {0.5, 1.0, 1.5}) {
    LevyModel m = fractional(alpha);
    m.dimension = 1;
    m.delta = std::sqrt(h) / 10;
    m.fold_tail = true;
    const QuadratureTable t = build_quadrature(m, grid, d);
    for (double x : {0.0, 0.25, 0.5, 1.5, 2.0}) {
      int node = 0;
      for (int i = 0; i < grid.size(); ++i) {
        if (std::abs(grid.node(i)(0) - x) < std::abs(grid.node(node)(0) - x)) node = i;
      }
      const double o = oracle::fractional_gauss_direct(alpha, grid.node(node)(0));
      worst = std::max(worst, std::abs(apply_nonlocal(t, u, exact, node) - o) / std::abs(o));
    }
  }
  std::ostringstream os;
  os << "alpha in {0.5, 1, 1.5} at 5 points: max relative error " << worst;
  return {worst <= 1e-3, os.str()};
}

Outcome penalization() {
  const double h = pi / 64;
  const Domain d = Domain::interval(0, pi);
  GridOptions go;
  go.h = h;
  go.margin = 1.0;
  const auto problem = [&](BcMode mode) {
    SolverConfig cfg;
    cfg.bc_mode = mode;
    return Problem::make(d, go, Nonlinearity::linear(record(1.0, 1.0, [](const Point& x) { return std::cos(x(0)); }), 1.0),
                         fractional(1.0), ObliqueField::normal(d), cfg);
  };
  const Problem pp = problem(BcMode::Penalized), pd = problem(BcMode::DirectExtension);
  const Solution sp = solve(pp), sd = solve(pd);
  std::ostringstream os;
  bool decreasing = sp.kappa_trace.size() >= 3;
  os << "Delta_j =";
  for (std::size_t j = 1; j < sp.kappa_trace.size(); ++j) {
    os << " " << sp.kappa_trace[j].delta;
    if (j >= 2 && !(sp.kappa_trace[j].delta < sp.kappa_trace[j - 1].delta)) decreasing = false;
  }
  double gap = 0.0;
  for (int i = 0; i < pp.grid->size(); ++i) {
    if (pp.in_closure(i)) gap = std::max(gap, std::abs(sp.values[i] - sd.values[i]));
  }
  const double last = sp.kappa_trace.back().delta;
  const bool close = gap <= 5 * (last + 2 * h);
  os << (decreasing ? " (strictly decreasing)" : " (not strictly decreasing)") << "; |u_kappa - u_direct| = "
     << gap << " vs bound " << 5 * (last + 2 * h);
  return {decreasing && close && sp.converged && sd.converged, os.str()};
}

Outcome extension_identity() {
  const Domain ball = Domain::ball(P(0, 0), 1.0);
  const double h = 0.1;
  GridOptions go;
  go.h = h;
  go.margin = 1.0;
  SolverConfig cfg;
  cfg.bc_mode = BcMode::DirectExtension;
  const Problem p = Problem::make(ball, go, Nonlinearity::linear(record(1.0, 0.0, constant_field(0.0)), 1.0),
                                  truncated_fractional(), ObliqueField::normal(ball, constant_field(1.0)), cfg);
  const Solution s = solve(p);
  double worst = 0.0;
  for (int i = 0; i < p.grid->size(); ++i) {
    if (p.in_closure(i)) continue;
    const Point y = p.grid->node(i);
    const double uP = p.grid->interpolate_value(s.values, ball.closest_point(y));
    worst = std::max(worst, std::abs(s.values[i] - uP - ball.dist_to_closure(y)));
  }
  std::ostringstream os;
  os << "max over exterior nodes |u(y) - u(P_y) - d(y)| = " << worst << " (3h = " << 3 * h << ")";
  return {s.converged && worst <= 3 * h, os.str()};
}

Outcome flow_correctness() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-3, 3);
  double tau_err = 0.0, end_err = 0.0;
  for (const Domain& d : {Domain::ball(P(0, 0), 1.0), Domain::box(P(0, 0), P(1, 1))}) {
    const ObliqueField f = ObliqueField::normal(d);
    for (int n = 0; n < 200;) {
      const Point y = P(U(rng), U(rng));
      if (d.dist_to_closure(y) < 1e-3) continue;
      ++n;
      const FlowResult r = integrate_flow(f, d, y);
      tau_err = std::max(tau_err, std::abs(r.tau - d.dist_to_closure(y)));
      end_err = std::max(end_err, (r.endpoint - d.closest_point(y)).norm());
    }
  }
  // Groenwall: |X_x(t) - X_y(t)| <= e^{L t} |x - y| for a Lipschitz non-normal field.
  const Domain ball = Domain::ball(P(0, 0), 0.5);
  ObliqueField g = ObliqueField::normal(ball);
  g.gamma = [](const Point& x) { return P(1.0 + 0.3 * std::sin(x(1)), 0.2 * std::cos(x(0))); };
  g.is_normal = false;
  const double L = std::sqrt(0.3 * 0.3 + 0.2 * 0.2);
  std::uniform_real_distribution<double> V(-0.05, 0.05);
  FlowOptions o;
  o.record_path = true;
  o.step = 1e-3;
  double slack = INFINITY;
  for (int k = 0; k < 100; ++k) {
    const Point x = P(3.0 + 10 * V(rng), 2 * V(rng));
    const Point y = x + P(V(rng), V(rng));
    const FlowResult a = integrate_flow(g, ball, x, o), b = integrate_flow(g, ball, y, o);
    const std::size_t m = std::min(a.path.size(), b.path.size());
    for (std::size_t i = 0; i < m; ++i) {
      if (std::abs(a.path[i].t - b.path[i].t) > 1e-12) continue;
      const double bound = std::exp(L * a.path[i].t) * (x - y).norm();
      slack = std::min(slack, bound + 1e-12 - (a.path[i].x - b.path[i].x).norm());
    }
  }
  std::ostringstream os;
  os << "400 points: max |tau - d| = " << tau_err << ", max |X - P_y| = " << end_err
     << "; Groenwall min slack over 100 pairs = " << slack;
  return {tau_err <= 1e-9 && end_err <= 1e-9 && slack >= 0, os.str()};
}

Outcome mc_cross_check() {
  const Domain ball = Domain::ball(P(0, 0), 1.0);
  const ObliqueField f = rotated_field(ball, 0.3, constant_field(1.0));
  const Nonlinearity nl = Nonlinearity::linear(record(1.0, 0.0, constant_field(0.0)), 1.0);
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<Problem> problems;
  std::vector<Solution> sols;
  for (double h : {0.05, 0.1}) {
    GridOptions go;
    go.h = h;
    go.margin = 1.0;
    SolverConfig cfg;
    cfg.bc_mode = BcMode::DirectExtension;
    cfg.threads = static_cast<int>(threads);
    problems.push_back(Problem::make(ball, go, nl, truncated_fractional(), f, cfg));
    sols.push_back(solve(problems.back()));
  }
  JumpProcessConfig mc;
  mc.n_paths = 200000;
  mc.time_step = 0.02;
  mc.target_accuracy = 0.01;
  mc.threads = static_cast<int>(threads);
  std::ostringstream os;
  bool ok = sols[0].converged && sols[1].converged;
  double worst = 0.0;
  for (const Point& x : {P(0, 0), P(0.5, 0), P(0, -0.5), P(0.6, 0.6), P(0.9, 0)}) {
    const double u = problems[0].grid->interpolate_value(sols[0].values, x);
    const double e_h = std::abs(u - problems[1].grid->interpolate_value(sols[1].values, x));
    const McEstimate e = simulate_value(nl, truncated_fractional(), f, ball, x, mc);
    const double z = (e.estimate - u) / std::sqrt(e.std_error * e.std_error + e_h * e_h);
    worst = std::max(worst, std::abs(z));
    os << "(" << x(0) << "," << x(1) << "): mc " << e.estimate << " +- " << e.std_error << ", u_h " << u
       << ", e_h " << e_h << ", z " << z << "; ";
  }
  ok = ok && worst <= 3.0;
  os << "max |z| = " << worst;
  return {ok, os.str()};
}

Outcome theta_derivative() {
  const Domain ball = Domain::ball(P(0, 0), 1.0);
  const ObliqueField f = rotated_field(ball, 0.3, std::nullopt);
  const double delta = 0.1, eps = 1e-4;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> R(1.0 - 0.8 * delta, 1.0 + 0.8 * delta), A(0, 2 * pi);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double r = R(rng), a = A(rng);
    const Point x = P(r * std::cos(a), r * std::sin(a));
    const Point gx = f.gamma(x);
    const double dw = (theta_time(f, ball, delta, x + eps * gx) - theta_time(f, ball, delta, x - eps * gx)) / (2 * eps);
    worst = std::max(worst, std::abs(dw - 2.0));
  }
  std::ostringstream os;
  os << "50 band points: max |gamma . Dw - 2| = " << worst;
  return {worst <= 1e-3, os.str()};
}

}  // namespace

// Optional arguments select criteria by number; default runs all.
int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"constant solution exactness", constant_exactness},
      {"sup-norm bound", sup_bound},
      {"discrete comparison", comparison},
      {"local closed-form order", local_order},
      {"fractional quadrature oracle", quadrature_oracle},
      {"penalization convergence", penalization},
      {"extension identity", extension_identity},
      {"flow correctness", flow_correctness},
      {"oblique Monte Carlo cross-check", mc_cross_check},
      {"theta diagnostic", theta_derivative},
  };
  int failed = 0;
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected[k]) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %zu %s: %s (%s) [%.1f s]\n", k + 1, criteria[k].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
