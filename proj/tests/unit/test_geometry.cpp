#include "nlobc/error.hpp"
#include "nlobc/flow.hpp"
#include "nlobc/geometry.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nlobc;

namespace {

Point P(double a, double b) { return make_point({a, b}); }

std::vector<Domain> convex_presets() {
  std::vector<Domain> d;
  d.push_back(Domain::ball(P(0, 0), 1.0));
  d.push_back(Domain::box(P(0, 0), P(1, 1)));
  d.push_back(Domain::polygon({P(0, 0), P(2, 0), P(1, 1.5)}));
  d.push_back(Domain::half_space(P(0, 0), P(0, 1)));
  ImplicitSdf s;
  s.sdf = [](const Point& x) { return x.norm() - 1.0; };
  s.lo = P(-1, -1);
  s.hi = P(1, 1);
  d.push_back(Domain::implicit(s, true));
  return d;
}

Point random_point(std::mt19937_64& rng, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  return P(u(rng), u(rng));
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("distance examples") {
  CHECK(Domain::interval(0, 1).dist_to_closure(make_point({1.5})) == doctest::Approx(0.5));
  const Domain ball = Domain::ball(P(0, 0), 1.0);
  CHECK(ball.dist_to_closure(P(2, 0)) == doctest::Approx(1.0));
  CHECK(ball.dist_to_closure(P(0.3, -0.2)) == 0.0);
  CHECK(ball.dist_to_closure(P(1, 0)) == 0.0);
}

TEST_CASE("signed distance examples") {
  const Domain ball = Domain::ball(P(0, 0), 1.0);
  CHECK(ball.signed_distance(P(0.5, 0)) == doctest::Approx(0.5));
  CHECK(ball.signed_distance(P(1.2, 0)) == doctest::Approx(-0.2));
  const Domain hs = Domain::half_space(P(0, 0), P(0, -1));  // {x2 > 0}
  CHECK(hs.signed_distance(P(0.7, -0.3)) == doctest::Approx(-0.3));
}

TEST_CASE("truncated distance") {
  const Domain ball = Domain::ball(P(0, 0), 1.0);
  CHECK(ball.truncated_distance(P(0, 0)) == 0.0);
  CHECK(ball.truncated_distance(P(1.4, 0)) == doctest::Approx(0.4));
  CHECK(ball.truncated_distance(P(8, 0)) == 1.0);
}

TEST_CASE("normal examples") {
  const Domain ball = Domain::ball(P(0, 0), 1.0);
  const Point n = ball.normal(P(2, 0));
  CHECK(n(0) == doctest::Approx(1.0));
  CHECK(n(1) == doctest::Approx(0.0));
  const Point m = Domain::box(P(0, 0), P(1, 1)).normal(P(0.5, 1.3));
  CHECK(m(0) == doctest::Approx(0.0));
  CHECK(m(1) == doctest::Approx(1.0));
  ImplicitSdf s;
  s.sdf = [](const Point& x) { return x.norm() - 1.0; };
  s.lo = P(-1, -1);
  s.hi = P(1, 1);
  const Point k = Domain::implicit(s, true).normal(P(0, 3));
  CHECK(std::abs(k(0)) <= 1e-5);
  CHECK(std::abs(k(1) - 1.0) <= 1e-5);
  CHECK_THROWS_AS(Domain::box(P(0, 0), P(1, 1)).normal(P(1, 1)), Error);
}

TEST_CASE("normal cone examples") {
  const Domain sq = Domain::box(P(0, 0), P(1, 1));
  const NormalCone c = sq.normal_cone(P(1, 1));
  REQUIRE(c.generators.size() == 2);
  bool e1 = false, e2 = false;
  for (const Point& g : c.generators) {
    e1 = e1 || (g - P(1, 0)).norm() < 1e-12;
    e2 = e2 || (g - P(0, 1)).norm() < 1e-12;
  }
  CHECK(e1);
  CHECK(e2);
  for (const Point& v : c.sample(16)) {
    CHECK(v.norm() == doctest::Approx(1.0));
    CHECK(v(0) >= -1e-12);
    CHECK(v(1) >= -1e-12);
  }
  const NormalCone m = sq.normal_cone(P(1, 0.5));
  REQUIRE(m.singleton());
  CHECK((m.generators[0] - P(1, 0)).norm() < 1e-12);
  const Domain ball = Domain::ball(P(0.5, 0), 2.0);
  const Point p = P(0.5 + 2 * std::cos(0.7), 2 * std::sin(0.7));
  const NormalCone b = ball.normal_cone(p);
  REQUIRE(b.singleton());
  CHECK((b.generators[0] - (p - P(0.5, 0)) / 2.0).norm() < 1e-12);
}

TEST_CASE("normal cone needs convexity") {
  ImplicitSdf s;
  s.sdf = [](const Point& x) { return 0.5 - x.norm(); };  // exterior of a disk
  s.lo = P(-2, -2);
  s.hi = P(2, 2);
  CHECK_THROWS_AS(Domain::implicit(s, false).normal_cone(P(0.5, 0)), Error);
}

TEST_CASE("distance is 1-Lipschitz, zero exactly on the closure, convex along segments") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> t(0, 1);
  for (const Domain& d : convex_presets()) {
    for (int k = 0; k < 300; ++k) {
      const Point x = random_point(rng, 3.0), y = random_point(rng, 3.0);
      const double dx = d.dist_to_closure(x), dy = d.dist_to_closure(y);
      CHECK(dx >= 0.0);
      CHECK(std::abs(dx - dy) <= (x - y).norm() + 1e-12);
      CHECK((dx == 0.0) == (d.exact_signed_distance(x) >= 0.0));
      CHECK(d.dist_to_closure(0.5 * (x + y)) <= 0.5 * (dx + dy) + 1e-12);
    }
  }
}

TEST_CASE("exterior normals are unit; projections land on the boundary and contract") {
  std::mt19937_64 rng(12);
  for (const Domain& d : convex_presets()) {
    const double diam = d.diameter();
    int checked = 0;
    for (int k = 0; k < 400 && checked < 100; ++k) {
      const Point x = random_point(rng, 3.0), y = random_point(rng, 3.0);
      const double dx = d.dist_to_closure(x), dy = d.dist_to_closure(y);
      if (dx <= 0 || dy <= 0) continue;
      ++checked;
      const Point nx = d.normal(x);
      CHECK(nx.norm() == doctest::Approx(1.0).epsilon(1e-12));
      const Point px = x - dx * nx, py = y - dy * d.normal(y);
      CHECK(std::abs(d.exact_signed_distance(px)) <= 1e-9 * diam);
      CHECK((px - py).norm() <= (x - y).norm() + 1e-9);
      // Agrees with the closed-form projection.
      CHECK((project(d, x).point - px).norm() <= 1e-9);
    }
    CHECK(checked > 20);
  }
}

TEST_CASE("signed distance matches the exact distance inside the band") {
  const Domain ball = Domain::ball(P(0, 0), 1.0);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> r(0.6, 1.45), th(0, 2 * std::numbers::pi);
  for (int k = 0; k < 200; ++k) {
    const double rad = r(rng), a = th(rng);
    const Point x = P(rad * std::cos(a), rad * std::sin(a));
    if (std::abs(1.0 - rad) > 0.25 * ball.diameter()) continue;
    CHECK(ball.signed_distance(x) == doctest::Approx(1.0 - rad).epsilon(1e-12));
    if (rad > 1) CHECK(-ball.signed_distance(x) == doctest::Approx(ball.dist_to_closure(x)));
  }
  // Bounded away from the band.
  CHECK(std::abs(ball.signed_distance(P(40, 0))) <= 1.5 * 0.25 * ball.diameter());
}

}  // TEST_SUITE
