#include "nlobc/error.hpp"
#include "nlobc/grid.hpp"
#include "nlobc/levy.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nlobc;

namespace {

struct Setup1d {
  Domain domain = Domain::interval(-1, 1);
  Grid grid;
  Setup1d(double h, double margin) {
    GridOptions go;
    go.h = h;
    go.margin = margin;
    grid = Grid::build(domain, go);
  }
  int nearest(double x) const {
    int best = 0;
    for (int i = 0; i < grid.size(); ++i) {
      if (std::abs(grid.node(i)(0) - x) < std::abs(grid.node(best)(0) - x)) best = i;
    }
    return best;
  }
};

ExteriorClosure exact_closure(ScalarField f) {
  return [f](const Point& y) {
    LinearForm l;
    l.constant = f(y);
    return l;
  };
}

LevyModel fractional(double alpha, int dim = 1) {
  LevyModel m;
  m.measure = FractionalLaplacian{alpha, 0.0};
  m.dimension = dim;
  return m;
}

const ScalarField gauss = [](const Point& x) { return std::exp(-x.squaredNorm()); };

}  // namespace

TEST_SUITE("levy") {

TEST_CASE("normalization constant") {
  for (double a : {0.3, 0.5, 1.0, 1.5, 1.9}) {
    CHECK(fractional_constant(1, a) == doctest::Approx(oracle::fractional_constant_1d(a)).epsilon(1e-14));
  }
  CHECK(fractional_constant(1, 1.0) == doctest::Approx(1.0 / std::numbers::pi));
}

TEST_CASE("small-jump second moment in closed form") {
  const double c = oracle::fractional_constant_1d(1.0);
  const QuadratureTable t = build_quadrature(fractional(1.0), 1, 0.01);
  // int_{|z|<delta} z^2 c |z|^{-2} dz = 2 c delta.
  CHECK(t.sigma_delta()(0, 0) == doctest::Approx(2 * c * 0.01).epsilon(1e-12));
  for (double a : {0.5, 1.5}) {
    const double ca = oracle::fractional_constant_1d(a);
    const QuadratureTable s = build_quadrature(fractional(a), 1, 0.05);
    CHECK(s.sigma_delta()(0, 0) == doctest::Approx(2 * ca * std::pow(0.05, 2 - a) / (2 - a)).epsilon(1e-12));
  }
  // 2-D: each diagonal entry is c * pi * delta^{2-alpha} / (2 - alpha).
  const double c2 = 1.0 * std::tgamma(1.5) / (std::numbers::pi * std::tgamma(0.5));
  const QuadratureTable t2 = build_quadrature(fractional(1.0, 2), 2, 0.1);
  CHECK(t2.sigma_delta()(0, 0) == doctest::Approx(c2 * std::numbers::pi * 0.1).epsilon(1e-12));
  CHECK(t2.sigma_delta()(1, 1) == doctest::Approx(t2.sigma_delta()(0, 0)));
  CHECK(std::abs(t2.sigma_delta()(0, 1)) < 1e-15);
}

TEST_CASE("compound Poisson uniform on [1, 2]") {
  LevyModel m;
  m.measure = CompoundPoisson{[](const Point& z) { return z(0) >= 1.0 && z(0) <= 2.0 ? 1.0 : 0.0; }, 2.0, {1.0, 2.0}};
  const QuadratureTable t = build_quadrature(m, 1, 0.1);
  double total = 0.0;
  for (const JumpCell& c : t.cells()) total += c.mass;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.sigma_delta()(0, 0) == 0.0);
  CHECK(t.drift()(0) == 0.0);

  // u = x^2 at x = 0: int_1^2 z^2 dz = 7/3.
  Setup1d s(1.0 / 256, 3.0);
  m.delta = 0.1;
  const QuadratureTable tg = build_quadrature(m, s.grid, s.domain);
  const ScalarField sq = [](const Point& x) { return x(0) * x(0); };
  const Eigen::VectorXd u = s.grid.sample(sq);
  const int i = s.nearest(0.0);
  const double x0 = s.grid.node(i)(0);
  // Oracle at the node: int_1^2 ((x0+z)^2 - x0^2) dz.
  const double expect = 7.0 / 3.0 + x0 * 3.0;
  CHECK(apply_nonlocal(tg, u, exact_closure(sq), i) == doctest::Approx(expect).epsilon(1e-4));
}

TEST_CASE("tempered tail mass shrinks with the truncation radius") {
  LevyModel m;
  m.measure = TemperedStable{1.2, 0.7, 0.0};
  double prev = INFINITY;
  for (double R : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    m.trunc_radius = R;
    const double tail = build_quadrature(m, 1, 0.1).tail_mass();
    CHECK(tail < prev);
    CHECK(tail >= 0.0);
    prev = tail;
  }
  CHECK(prev < 1e-5);
}

TEST_CASE("constants are annihilated") {
  Setup1d s(1.0 / 64, 2.0);
  for (double a : {0.5, 1.0, 1.5}) {
    LevyModel m = fractional(a);
    const QuadratureTable t = build_quadrature(m, s.grid, s.domain);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(s.grid.size(), 3.0);
    for (int i = 0; i < s.grid.size(); i += 7) {
      CHECK(std::abs(apply_nonlocal(t, u, exact_closure(constant_field(3.0)), i)) < 1e-10);
    }
  }
}

TEST_CASE("gaussian against the singular-integral oracle") {
  // The two oracles agree with each other first.
  for (double a : {0.5, 1.0, 1.5}) {
    for (double x : {0.0, 0.7, 2.0}) {
      CHECK(oracle::fractional_gauss_direct(a, x) ==
            doctest::Approx(oracle::fractional_gauss_fourier(a, x)).epsilon(1e-9));
    }
  }
  const double h = 1.0 / 512;
  Setup1d s(h, 5.0);
  const Eigen::VectorXd u = s.grid.sample(gauss);
  LevyModel m = fractional(1.0);
  m.delta = std::sqrt(h) / 10;
  m.fold_tail = true;
  const QuadratureTable t = build_quadrature(m, s.grid, s.domain);
  const int i = s.nearest(0.0);
  const double o = oracle::fractional_gauss_direct(1.0, s.grid.node(i)(0));
  CHECK(std::abs(apply_nonlocal(t, u, exact_closure(gauss), i) - o) <= 1e-3 * std::abs(o));
}

TEST_CASE("far weights are nonnegative and the scheme is monotone") {
  Setup1d s(1.0 / 32, 2.0);
  LevyModel m = fractional(1.2);
  const QuadratureTable t = build_quadrature(m, s.grid, s.domain);
  for (const JumpCell& c : t.cells()) CHECK(c.mass >= 0.0);
  const ExteriorClosure cl = exact_closure(constant_field(0.0));
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> U(-1, 1);
  Eigen::VectorXd u(s.grid.size());
  for (int k = 0; k < u.size(); ++k) u[k] = U(rng);
  const int i = s.nearest(0.1);
  const double base = apply_nonlocal(t, u, cl, i);
  for (int j = 0; j < s.grid.size(); ++j) {
    if (j == i) continue;
    Eigen::VectorXd v = u;
    v[j] += 0.5;
    CHECK(apply_nonlocal(t, v, cl, i) >= base - 1e-12);
  }
}

TEST_CASE("small-jump moment is positive semidefinite") {
  for (double a : {0.4, 1.0, 1.7}) {
    const QuadratureTable t = build_quadrature(fractional(a, 2), 2, 0.2);
    Eigen::SelfAdjointEigenSolver<SquareMatrix> es(t.sigma_delta());
    CHECK(es.eigenvalues().minCoeff() >= 0.0);
  }
}

TEST_CASE("translation equivariance") {
  const double h = 1.0 / 64;
  Setup1d s(h, 3.0);
  LevyModel m = fractional(1.0);
  const QuadratureTable t = build_quadrature(m, s.grid, s.domain);
  const double c = 10 * h;
  const ScalarField shifted = [c](const Point& x) { return std::exp(-(x(0) - c) * (x(0) - c)); };
  const Eigen::VectorXd u = s.grid.sample(gauss), v = s.grid.sample(shifted);
  const int i = s.nearest(-0.3);
  const double a = apply_nonlocal(t, u, exact_closure(gauss), i);
  const double b = apply_nonlocal(t, v, exact_closure(shifted), i + 10);
  CHECK(a == doctest::Approx(b).epsilon(1e-3));
}

TEST_CASE("fractional scaling law") {
  const double h = 1.0 / 256, alpha = 1.0, sc = 2.0;
  Setup1d s(h, 5.0);
  LevyModel m = fractional(alpha);
  m.fold_tail = true;
  const QuadratureTable t = build_quadrature(m, s.grid, s.domain);
  const ScalarField us = [sc](const Point& x) { return std::exp(-sc * sc * x(0) * x(0)); };
  const int i = s.nearest(0.25), j = s.nearest(0.5);
  const double lhs = apply_nonlocal(t, s.grid.sample(us), exact_closure(us), i);
  const double rhs = std::pow(sc, alpha) * apply_nonlocal(t, s.grid.sample(gauss), exact_closure(gauss), j);
  CHECK(lhs == doctest::Approx(rhs).epsilon(2e-2));
  // Both sides against the oracle value s^alpha I[u](s x).
  const double o = std::pow(sc, alpha) * oracle::fractional_gauss_direct(alpha, sc * s.grid.node(i)(0));
  CHECK(lhs == doctest::Approx(o).epsilon(2e-2));
}

TEST_CASE("consistency order on the gaussian") {
  for (double alpha : {0.5, 1.0, 1.5}) {
    std::vector<double> err, hs = {1.0 / 64, 1.0 / 128, 1.0 / 256};
    for (double h : hs) {
      Setup1d s(h, 5.0);
      LevyModel m = fractional(alpha);
      m.delta = std::sqrt(h);
      m.fold_tail = true;
      const QuadratureTable t = build_quadrature(m, s.grid, s.domain);
      const int i = s.nearest(0.0);
      const double o = oracle::fractional_gauss_direct(alpha, s.grid.node(i)(0));
      err.push_back(std::abs(apply_nonlocal(t, s.grid.sample(gauss), exact_closure(gauss), i) - o));
    }
    // Least-squares slope of log err against log h.
    double mx = 0, my = 0;
    for (int k = 0; k < 3; ++k) mx += std::log(hs[k]) / 3, my += std::log(err[k]) / 3;
    double sxy = 0, sxx = 0;
    for (int k = 0; k < 3; ++k) {
      sxy += (std::log(hs[k]) - mx) * (std::log(err[k]) - my);
      sxx += (std::log(hs[k]) - mx) * (std::log(hs[k]) - mx);
    }
    INFO("alpha = " << alpha << " errors " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(sxy / sxx >= std::min(1.0, 2.0 - alpha) - 0.05);
  }
}

TEST_CASE("exterior integrability") {
  const Domain ball = Domain::ball(make_point({0, 0}), 1.0);
  ObliqueField g = ObliqueField::normal(ball, constant_field(1.0));
  g.g_compact = false;
  CHECK(check_exterior_integrability(fractional(1.5, 2), g, ball).ok);
  CHECK_FALSE(check_exterior_integrability(fractional(0.5, 2), g, ball).ok);
  g.g_compact = true;
  CHECK(check_exterior_integrability(fractional(0.5, 2), g, ball).ok);
}

TEST_CASE("errors") {
  Setup1d s(1.0 / 64, 1.0);
  LevyModel m = fractional(1.0);
  m.delta = 0.5;
  m.delta_safety = 4;
  CHECK_THROWS_AS(build_quadrature(m, s.grid, s.domain), Error);
  CHECK_THROWS_AS(build_quadrature(fractional(2.5), 1, 0.1), Error);
  // Landing outside the box without a closure.
  LevyModel w = fractional(1.0);
  const QuadratureTable t = build_quadrature(w, s.grid, s.domain);
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(s.grid.size());
  try {
    apply_nonlocal(t, u, ExteriorClosure{}, 0);
    FAIL("expected ClosureRequired");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClosureRequired);
  }
}

}  // TEST_SUITE
