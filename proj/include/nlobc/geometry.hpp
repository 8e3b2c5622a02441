#pragma once

#include "nlobc/types.hpp"

#include <string>
#include <variant>
#include <vector>

namespace nlobc {

struct Interval {
  double a = 0.0;
  double b = 1.0;
};

struct Box {
  Point lo;
  Point hi;
};

struct Ball {
  Point center;
  double radius = 1.0;
};

/// Convex polygon in the plane, vertices in counter-clockwise order.
struct ConvexPolygon {
  std::vector<Point> vertices;
};

/// {x : (x - point) . normal < 0}; `normal` is the outward unit normal.
struct HalfSpace {
  Point point;
  Point normal;
};

/// Domain given by a level-set function `sdf` (negative inside, positive
/// outside) with Lipschitz bound `lipschitz`. `lo`/`hi` bound the domain.
struct ImplicitSdf {
  ScalarField sdf;
  double lipschitz = 1.0;
  Point lo;
  Point hi;
};

/// Finite description of the normal cone N_Omega(x) at a boundary point.
struct NormalCone {
  /// Extreme unit generators. One entry at smooth points.
  std::vector<Point> generators;

  bool singleton() const { return generators.size() == 1; }

  /// Unit vectors spanning the cone: the generators plus `rays` normalized
  /// intermediate directions (planar arcs are sampled by angle).
  std::vector<Point> sample(int rays = 64) const;
};

struct DomainOptions {
  /// Width of the band where signed_distance is exact, as a fraction of diam.
  double band_fraction = 0.25;
  /// Central-difference step for normals of implicit domains, times diam.
  double normal_step_fraction = 1e-6;
  /// Points with |exact signed distance| below this (times diam) count as boundary points.
  double boundary_tolerance_fraction = 1e-9;
};

/// The region Omega with the distance, normal and projection queries used by
/// every other module. Immutable after construction.
class Domain {
 public:
  using Shape = std::variant<Interval, Box, Ball, ConvexPolygon, HalfSpace, ImplicitSdf>;

  static Domain interval(double a, double b, DomainOptions opts = {});
  static Domain box(const Point& lo, const Point& hi, DomainOptions opts = {});
  static Domain ball(const Point& center, double radius, DomainOptions opts = {});
  static Domain polygon(std::vector<Point> vertices, DomainOptions opts = {});
  static Domain half_space(const Point& point, const Point& outward_normal,
                           DomainOptions opts = {});
  /// `convex` is the caller's assertion; it is spot checked and a warning is
  /// recorded (see warnings()) when a sampled segment violates it.
  static Domain implicit(ImplicitSdf shape, bool convex, DomainOptions opts = {});

  const Shape& shape() const { return shape_; }
  std::string shape_name() const;
  int dimension() const { return dim_; }
  bool convex() const { return convex_; }
  bool bounded() const;
  /// Diameter of a bounded domain; 1 for a half-space.
  double diameter() const { return diam_; }
  const DomainOptions& options() const { return opts_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Axis-aligned bounds of the closure. Only for bounded domains.
  std::pair<Point, Point> bounding_box() const;

  /// dist(x, closure of Omega).
  double dist_to_closure(const Point& x) const;

  /// Exact signed distance to the boundary: positive inside, negative outside.
  double exact_signed_distance(const Point& x) const;

  /// Bounded smooth signed distance: exact for |d| <= r0, blended with a
  /// cubic-slope profile on [r0, 2 r0] and constant +-1.5 r0 beyond, where
  /// r0 = band_fraction * diam.
  double signed_distance(const Point& x) const;

  /// min(dist_to_closure(x), 1).
  double truncated_distance(const Point& x) const;

  bool in_closure(const Point& x) const { return dist_to_closure(x) == 0.0; }
  bool on_boundary(const Point& x) const;

  /// Outward unit normal D(dist_to_closure) at exterior points, or the
  /// outward normal at smooth boundary points. Throws CornerPoint at
  /// non-smooth boundary points.
  Point normal(const Point& x) const;

  /// Outward unit direction valid on all of R^N away from the medial axis:
  /// equals normal(x) outside and -grad(exact_signed_distance) inside.
  Point extended_normal(const Point& x) const;

  /// Normal cone at a boundary point of a convex domain. Throws NotConvex.
  NormalCone normal_cone(const Point& x) const;

  /// Closest point of the closure.
  Point closest_point(const Point& x) const;

 private:
  Domain(Shape shape, int dim, bool convex, DomainOptions opts);

  Shape shape_;
  int dim_ = 1;
  bool convex_ = true;
  double diam_ = 1.0;
  DomainOptions opts_;
  std::vector<std::string> warnings_;
};

}  // namespace nlobc
