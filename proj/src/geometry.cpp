#include "nlobc/geometry.hpp"

#include "nlobc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace nlobc {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Point unit_axis(int dim, int axis, double sign) {
  Point e = Point::Zero(dim);
  e(axis) = sign;
  return e;
}

Point edge_normal(const Point& a, const Point& b) {
  Point n(2);
  n << b(1) - a(1), -(b(0) - a(0));
  return n.normalized();
}

Point closest_on_segment(const Point& x, const Point& a, const Point& b) {
  const Point ab = b - a;
  const double t = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return a + t * ab;
}

// Smooth clamp of a signed distance: identity on |t| <= r0, slope decaying
// with the smoothstep profile on [r0, 2 r0], constant 1.5 r0 beyond.
double smooth_clamp(double t, double r0) {
  const double s = std::abs(t);
  if (s <= r0) return t;
  double v = 1.5 * r0;
  if (s < 2.0 * r0) {
    const double u = (s - r0) / r0;
    v = r0 + r0 * (u - u * u * u + 0.5 * u * u * u * u);
  }
  return t < 0 ? -v : v;
}

}  // namespace

std::vector<Point> NormalCone::sample(int rays) const {
  if (generators.size() <= 1 || rays <= 0) return generators;
  std::vector<Point> out;
  const int dim = static_cast<int>(generators.front().size());
  if (dim == 2 && generators.size() == 2) {
    const double a0 = std::atan2(generators[0](1), generators[0](0));
    double a1 = std::atan2(generators[1](1), generators[1](0));
    double span = a1 - a0;
    while (span > std::numbers::pi) span -= 2 * std::numbers::pi;
    while (span < -std::numbers::pi) span += 2 * std::numbers::pi;
    for (int k = 0; k <= rays; ++k) {
      const double a = a0 + span * k / rays;
      Point p(2);
      p << std::cos(a), std::sin(a);
      out.push_back(p);
    }
    return out;
  }
  out = generators;
  const std::size_t m = generators.size();
  const int per_pair = std::max(1, rays / static_cast<int>(m * (m - 1) / 2));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      for (int k = 1; k < per_pair; ++k) {
        const double t = static_cast<double>(k) / per_pair;
        out.push_back(((1 - t) * generators[i] + t * generators[j]).normalized());
      }
    }
  }
  return out;
}

Domain::Domain(Shape shape, int dim, bool convex, DomainOptions opts)
    : shape_(std::move(shape)), dim_(dim), convex_(convex), opts_(opts) {
  if (dim_ < 1 || dim_ > kMaxDim) {
    throw Error(ErrorCode::InvalidArgument, "domain dimension must be in [1, 3]");
  }
  if (bounded()) {
    auto [lo, hi] = bounding_box();
    diam_ = (hi - lo).norm();
  }
}

Domain Domain::interval(double a, double b, DomainOptions opts) {
  if (!(a < b)) throw Error(ErrorCode::InvalidArgument, "interval needs a < b");
  return Domain(Interval{a, b}, 1, true, opts);
}

Domain Domain::box(const Point& lo, const Point& hi, DomainOptions opts) {
  if (lo.size() != hi.size() || (hi - lo).minCoeff() <= 0) {
    throw Error(ErrorCode::InvalidArgument, "box needs lo < hi componentwise");
  }
  return Domain(Box{lo, hi}, static_cast<int>(lo.size()), true, opts);
}

Domain Domain::ball(const Point& center, double radius, DomainOptions opts) {
  if (!(radius > 0)) throw Error(ErrorCode::InvalidArgument, "ball radius must be positive");
  return Domain(Ball{center, radius}, static_cast<int>(center.size()), true, opts);
}

Domain Domain::polygon(std::vector<Point> vertices, DomainOptions opts) {
  if (vertices.size() < 3) throw Error(ErrorCode::InvalidArgument, "polygon needs 3 vertices");
  double area = 0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Point& a = vertices[i];
    const Point& b = vertices[(i + 1) % vertices.size()];
    if (a.size() != 2) throw Error(ErrorCode::InvalidArgument, "polygon vertices must be 2-D");
    area += a(0) * b(1) - b(0) * a(1);
  }
  if (area < 0) std::reverse(vertices.begin(), vertices.end());
  const std::size_t m = vertices.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point e0 = vertices[(i + 1) % m] - vertices[i];
    const Point e1 = vertices[(i + 2) % m] - vertices[(i + 1) % m];
    if (e0(0) * e1(1) - e0(1) * e1(0) <= 0) {
      throw Error(ErrorCode::NotConvex, "polygon vertices are not strictly convex");
    }
  }
  return Domain(ConvexPolygon{std::move(vertices)}, 2, true, opts);
}

Domain Domain::half_space(const Point& point, const Point& outward_normal, DomainOptions opts) {
  if (point.size() != outward_normal.size() || outward_normal.norm() == 0) {
    throw Error(ErrorCode::InvalidArgument, "half-space needs a nonzero normal");
  }
  return Domain(HalfSpace{point, outward_normal.normalized()}, static_cast<int>(point.size()),
                true, opts);
}

Domain Domain::implicit(ImplicitSdf shape, bool convex, DomainOptions opts) {
  if (!shape.sdf || !(shape.lipschitz > 0) || shape.lo.size() != shape.hi.size()) {
    throw Error(ErrorCode::InvalidArgument, "implicit domain needs sdf, lipschitz and bounds");
  }
  const int dim = static_cast<int>(shape.lo.size());
  Domain d(std::move(shape), dim, convex, opts);
  if (convex) {
    // Spot check the asserted convexity on random segments of the bounding box.
    const auto& s = std::get<ImplicitSdf>(d.shape_);
    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Point span = s.hi - s.lo;
    auto draw = [&] {
      Point p(dim);
      for (int a = 0; a < dim; ++a) p(a) = s.lo(a) - 0.25 * span(a) + 1.5 * span(a) * unif(rng);
      return p;
    };
    int violations = 0;
    for (int k = 0; k < 256; ++k) {
      const Point x = draw();
      const Point y = draw();
      const double mid = d.dist_to_closure(0.5 * (x + y));
      const double avg = 0.5 * (d.dist_to_closure(x) + d.dist_to_closure(y));
      if (mid > avg + 1e-9 * d.diam_) ++violations;
    }
    if (violations > 0) {
      d.warnings_.push_back("implicit domain asserted convex but " + std::to_string(violations) +
                            " of 256 sampled segments violate midpoint convexity of the distance");
    }
  }
  return d;
}

std::string Domain::shape_name() const {
  return std::visit(Overloaded{[](const Interval&) { return std::string("interval"); },
                               [](const Box&) { return std::string("box"); },
                               [](const Ball&) { return std::string("ball"); },
                               [](const ConvexPolygon&) { return std::string("polygon"); },
                               [](const HalfSpace&) { return std::string("halfspace"); },
                               [](const ImplicitSdf&) { return std::string("implicit"); }},
                    shape_);
}

bool Domain::bounded() const { return !std::holds_alternative<HalfSpace>(shape_); }

std::pair<Point, Point> Domain::bounding_box() const {
  return std::visit(
      Overloaded{
          [](const Interval& s) { return std::pair{make_point({s.a}), make_point({s.b})}; },
          [](const Box& s) { return std::pair{s.lo, s.hi}; },
          [](const Ball& s) {
            return std::pair<Point, Point>{s.center.array() - s.radius,
                                           s.center.array() + s.radius};
          },
          [](const ConvexPolygon& s) {
            Point lo = s.vertices[0], hi = s.vertices[0];
            for (const auto& v : s.vertices) {
              lo = lo.cwiseMin(v);
              hi = hi.cwiseMax(v);
            }
            return std::pair{lo, hi};
          },
          [](const HalfSpace&) -> std::pair<Point, Point> {
            throw Error(ErrorCode::Unsupported, "half-space has no bounding box");
          },
          [](const ImplicitSdf& s) { return std::pair{s.lo, s.hi}; }},
      shape_);
}

double Domain::exact_signed_distance(const Point& x) const {
  return std::visit(
      Overloaded{
          [&](const Interval& s) { return std::min(x(0) - s.a, s.b - x(0)); },
          [&](const Box& s) {
            const Point c = x.cwiseMax(s.lo).cwiseMin(s.hi);
            const double out = (x - c).norm();
            if (out > 0) return -out;
            return std::min((x - s.lo).minCoeff(), (s.hi - x).minCoeff());
          },
          [&](const Ball& s) { return s.radius - (x - s.center).norm(); },
          [&](const ConvexPolygon& s) {
            const std::size_t m = s.vertices.size();
            double inside = std::numeric_limits<double>::infinity();
            bool is_inside = true;
            for (std::size_t i = 0; i < m; ++i) {
              const Point& a = s.vertices[i];
              const Point& b = s.vertices[(i + 1) % m];
              const double h = -(x - a).dot(edge_normal(a, b));
              if (h < 0) is_inside = false;
              inside = std::min(inside, h);
            }
            if (is_inside) return inside;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
              const Point p = closest_on_segment(x, s.vertices[i], s.vertices[(i + 1) % m]);
              best = std::min(best, (x - p).norm());
            }
            return -best;
          },
          [&](const HalfSpace& s) { return -(x - s.point).dot(s.normal); },
          [&](const ImplicitSdf& s) { return -s.sdf(x) / s.lipschitz; }},
      shape_);
}

double Domain::dist_to_closure(const Point& x) const {
  return std::max(0.0, -exact_signed_distance(x));
}

double Domain::signed_distance(const Point& x) const {
  // Infinite diameter: the affine distance is already smooth, nothing to clamp.
  if (std::holds_alternative<HalfSpace>(shape_)) return exact_signed_distance(x);
  const double r0 = opts_.band_fraction * diam_;
  return smooth_clamp(exact_signed_distance(x), r0);
}

double Domain::truncated_distance(const Point& x) const {
  return std::min(dist_to_closure(x), 1.0);
}

bool Domain::on_boundary(const Point& x) const {
  return std::abs(exact_signed_distance(x)) <= opts_.boundary_tolerance_fraction * diam_;
}

Point Domain::closest_point(const Point& x) const {
  return std::visit(
      Overloaded{
          [&](const Interval& s) { return make_point({std::clamp(x(0), s.a, s.b)}); },
          [&](const Box& s) -> Point { return x.cwiseMax(s.lo).cwiseMin(s.hi); },
          [&](const Ball& s) -> Point {
            const Point r = x - s.center;
            const double n = r.norm();
            if (n <= s.radius) return x;
            return s.center + r * (s.radius / n);
          },
          [&](const ConvexPolygon& s) -> Point {
            if (exact_signed_distance(x) >= 0) return x;
            const std::size_t m = s.vertices.size();
            Point best = s.vertices[0];
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
              const Point p = closest_on_segment(x, s.vertices[i], s.vertices[(i + 1) % m]);
              const double d = (x - p).norm();
              if (d < best_d) {
                best_d = d;
                best = p;
              }
            }
            return best;
          },
          [&](const HalfSpace& s) -> Point {
            const double h = (x - s.point).dot(s.normal);
            return h > 0 ? Point(x - h * s.normal) : x;
          },
          [&](const ImplicitSdf&) -> Point {
            const double d = dist_to_closure(x);
            if (d == 0) return x;
            return x - d * normal(x);
          }},
      shape_);
}

Point Domain::normal(const Point& x) const {
  const double tol = opts_.boundary_tolerance_fraction * diam_;
  const double sd = exact_signed_distance(x);
  if (sd > tol) {
    throw Error(ErrorCode::InvalidArgument, "normal requested at an interior point");
  }
  if (const auto* s = std::get_if<ImplicitSdf>(&shape_)) {
    const double step = opts_.normal_step_fraction * diam_;
    Point g(dim_);
    for (int a = 0; a < dim_; ++a) {
      Point xp = x, xm = x;
      xp(a) += step;
      xm(a) -= step;
      // Outside the boundary layer this is the central difference of
      // dist_to_closure; the level-set function extends it through the layer.
      if (dist_to_closure(xm) > 0 && dist_to_closure(xp) > 0) {
        g(a) = (dist_to_closure(xp) - dist_to_closure(xm)) / (2 * step);
      } else {
        g(a) = (s->sdf(xp) - s->sdf(xm)) / (2 * step * s->lipschitz);
      }
    }
    return g.normalized();
  }
  if (sd < -tol) {
    const Point r = x - closest_point(x);
    return r / r.norm();
  }
  // Boundary point.
  return std::visit(
      Overloaded{
          [&](const Interval& s) {
            return make_point({std::abs(x(0) - s.a) <= std::abs(x(0) - s.b) ? -1.0 : 1.0});
          },
          [&](const Box& s) -> Point {
            int active = 0;
            Point n = Point::Zero(dim_);
            for (int a = 0; a < dim_; ++a) {
              if (std::abs(x(a) - s.lo(a)) <= tol) {
                n(a) = -1;
                ++active;
              } else if (std::abs(x(a) - s.hi(a)) <= tol) {
                n(a) = 1;
                ++active;
              }
            }
            if (active != 1) throw Error(ErrorCode::CornerPoint, "box corner or edge point");
            return n;
          },
          [&](const Ball& s) -> Point { return (x - s.center).normalized(); },
          [&](const ConvexPolygon& s) -> Point {
            const std::size_t m = s.vertices.size();
            for (std::size_t i = 0; i < m; ++i) {
              if ((x - s.vertices[i]).norm() <= tol) {
                throw Error(ErrorCode::CornerPoint, "polygon vertex");
              }
            }
            for (std::size_t i = 0; i < m; ++i) {
              const Point& a = s.vertices[i];
              const Point& b = s.vertices[(i + 1) % m];
              if ((x - closest_on_segment(x, a, b)).norm() <= tol) return edge_normal(a, b);
            }
            throw Error(ErrorCode::InvalidArgument, "point is not on the polygon boundary");
          },
          [&](const HalfSpace& s) -> Point { return s.normal; },
          [&](const ImplicitSdf&) -> Point { return Point(); }},
      shape_);
}

Point Domain::extended_normal(const Point& x) const {
  // Strictly outside a polyhedral set: gradient of the distance, which points
  // at the nearest face or corner.
  if (std::holds_alternative<Box>(shape_) || std::holds_alternative<ConvexPolygon>(shape_)) {
    const Point r = x - closest_point(x);
    if (r.norm() > 1e-14 * diam_) return r.normalized();
  }
  if (exact_signed_distance(x) <= opts_.boundary_tolerance_fraction * diam_ &&
      !std::holds_alternative<ImplicitSdf>(shape_)) {
    try {
      return normal(x);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CornerPoint) throw;
    }
  }
  return std::visit(
      Overloaded{
          [&](const Interval& s) {
            return make_point({x(0) - s.a <= s.b - x(0) ? -1.0 : 1.0});
          },
          [&](const Box& s) -> Point {
            double best = std::numeric_limits<double>::infinity();
            Point n = Point::Zero(dim_);
            for (int a = 0; a < dim_; ++a) {
              if (x(a) - s.lo(a) < best) {
                best = x(a) - s.lo(a);
                n = unit_axis(dim_, a, -1);
              }
              if (s.hi(a) - x(a) < best) {
                best = s.hi(a) - x(a);
                n = unit_axis(dim_, a, 1);
              }
            }
            return n;
          },
          [&](const Ball& s) -> Point {
            const Point r = x - s.center;
            const double n = r.norm();
            if (n == 0) return unit_axis(dim_, 0, 1);
            return r / n;
          },
          [&](const ConvexPolygon& s) -> Point {
            const std::size_t m = s.vertices.size();
            double best = std::numeric_limits<double>::infinity();
            Point n(2);
            for (std::size_t i = 0; i < m; ++i) {
              const Point en = edge_normal(s.vertices[i], s.vertices[(i + 1) % m]);
              const double h = -(x - s.vertices[i]).dot(en);
              if (h < best) {
                best = h;
                n = en;
              }
            }
            return n;
          },
          [&](const HalfSpace& s) -> Point { return s.normal; },
          [&](const ImplicitSdf& s) -> Point {
            const double step = opts_.normal_step_fraction * diam_;
            Point g(dim_);
            for (int a = 0; a < dim_; ++a) {
              Point xp = x, xm = x;
              xp(a) += step;
              xm(a) -= step;
              g(a) = s.sdf(xp) - s.sdf(xm);
            }
            return g.normalized();
          }},
      shape_);
}

NormalCone Domain::normal_cone(const Point& x) const {
  if (!convex_) throw Error(ErrorCode::NotConvex, "normal cone requires a convex domain");
  const double tol = opts_.boundary_tolerance_fraction * diam_;
  if (!on_boundary(x)) {
    throw Error(ErrorCode::InvalidArgument, "normal cone requested away from the boundary");
  }
  if (const auto* s = std::get_if<Box>(&shape_)) {
    NormalCone cone;
    for (int a = 0; a < dim_; ++a) {
      if (std::abs(x(a) - s->lo(a)) <= tol) cone.generators.push_back(unit_axis(dim_, a, -1));
      if (std::abs(x(a) - s->hi(a)) <= tol) cone.generators.push_back(unit_axis(dim_, a, 1));
    }
    return cone;
  }
  if (const auto* s = std::get_if<ConvexPolygon>(&shape_)) {
    const std::size_t m = s->vertices.size();
    for (std::size_t i = 0; i < m; ++i) {
      if ((x - s->vertices[i]).norm() <= tol) {
        const Point& prev = s->vertices[(i + m - 1) % m];
        const Point& next = s->vertices[(i + 1) % m];
        return NormalCone{{edge_normal(prev, s->vertices[i]), edge_normal(s->vertices[i], next)}};
      }
    }
  }
  return NormalCone{{normal(x)}};
}

}  // namespace nlobc
