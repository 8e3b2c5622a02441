#include "nlobc/flow.hpp"

#include "nlobc/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace nlobc {

namespace {

// Event function: positive while the flow has not arrived, <= 0 after.
using EventFn = std::function<double(const Point&)>;

struct Step {
  Point x0, x1;
  Point f0, f1;  // -gamma at both ends
  double h = 0.0;

  Point hermite(double s) const {
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * x0 + h10 * h * f0 + h01 * x1 + h11 * h * f1;
  }
};

Point rk4(const VectorField& gamma, const Point& x, const Point& k1, double h) {
  const Point k2 = -gamma(x + 0.5 * h * k1);
  const Point k3 = -gamma(x + 0.5 * h * k2);
  const Point k4 = -gamma(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double default_tau_max(const ObliqueField& field, const Domain& domain, const Point& y,
                       const FlowOptions& opts) {
  if (opts.tau_max) return *opts.tau_max;
  if (!field.g_compact && field.growth_c > 0) return field.growth_c * (1.0 + y.norm()) * opts.safety;
  return 10.0 * (domain.diameter() + y.norm()) / std::max(field.nu, 1e-12);
}

FlowResult integrate_until(const ObliqueField& field, const EventFn& event, const Point& y,
                           double base_step, double tol, double tau_max, const FlowOptions& opts) {
  FlowResult res;
  const double gbound = std::max(field.gamma_bound, 1e-300);
  const bool want_g = static_cast<bool>(field.g) && !field.g_zero;
  Point x = y;
  double e = event(x);
  double t = 0.0;
  if (opts.record_path) res.path.push_back({0.0, x});
  if (e <= tol) {
    res.endpoint = x;
    res.converged = true;
    return res;
  }
  const double band = 10.0 * base_step * gbound;
  int increases = 0;
  Point f0 = -field.gamma(x);
  double g0 = want_g ? field.g(x) : 0.0;
  for (;;) {
    if (t > tau_max) {
      throw Error(ErrorCode::NoHit, "flow did not reach the domain before t = " +
                                        std::to_string(tau_max));
    }
    if (f0.norm() < 1e-12) {
      throw Error(ErrorCode::NoHit, "flow stagnates (|gamma| < 1e-12) outside the domain");
    }
    double h = base_step;
    if (opts.distance_ratio > 0) h = std::max(h, opts.distance_ratio * e / gbound);
    // Never let a stage cross the event surface: the exterior field is smooth
    // there, while the last step across a corner or kink is not.
    h = std::min(h, 0.9 * e / gbound);
    Step st{x, rk4(field.gamma, x, f0, h), f0, Point(), h};
    st.f1 = -field.gamma(st.x1);
    const double e1 = event(st.x1);
    if (e1 <= tol) {
      Point xe = st.x1;
      double theta = 1.0;
      if (e1 < -tol) {
        // Bracketing refinement: Illinois false position, with plain
        // bisection steps whenever the secant stalls at a bracket end.
        double lo = 0.0, hi = 1.0, elo = e, ehi = e1;
        int side = 0;
        for (int it = 0; it < 200; ++it) {
          theta = (lo * ehi - hi * elo) / (ehi - elo);
          if (!(theta > lo + 1e-3 * (hi - lo) && theta < hi - 1e-3 * (hi - lo)) || it % 8 == 7) {
            theta = 0.5 * (lo + hi);
          }
          xe = opts.hermite_events ? st.hermite(theta) : rk4(field.gamma, x, f0, theta * h);
          const double em = event(xe);
          if (std::abs(em) <= tol) break;
          if (em > tol) {
            lo = theta;
            elo = em;
            if (side == 1) ehi *= 0.5;
            side = 1;
          } else {
            hi = theta;
            ehi = em;
            if (side == -1) elo *= 0.5;
            side = -1;
          }
          if ((hi - lo) * h < 1e-16 * std::max(1.0, t)) break;
        }
      }
      if (want_g) {
        const Point xm = st.hermite(0.5 * theta);
        res.g_integral += theta * h / 6.0 * (g0 + 4.0 * field.g(xm) + field.g(xe));
      }
      t += theta * h;
      res.tau = t;
      res.endpoint = xe;
      res.converged = true;
      if (opts.record_path) res.path.push_back({t, xe});
      return res;
    }
    double g1 = 0.0;
    if (want_g) {
      g1 = field.g(st.x1);
      res.g_integral += h / 6.0 * (g0 + 4.0 * field.g(st.hermite(0.5)) + g1);
    }
    if (e1 > e && e < band) {
      if (++increases >= opts.max_backtrack) {
        throw Error(ErrorCode::StepTooLarge,
                    "distance increased for " + std::to_string(increases) +
                        " consecutive steps inside the boundary band");
      }
    } else {
      increases = 0;
    }
    t += h;
    x = st.x1;
    f0 = st.f1;
    g0 = g1;
    e = e1;
    if (opts.record_path) res.path.push_back({t, x});
  }
}

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, 5> kGlx = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                        0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> kGlw = {0.2369268850561891, 0.4786286704993665,
                                        0.5688888888888889, 0.4786286704993665,
                                        0.2369268850561891};

double line_integral(const ScalarField& g, const Point& y, const Point& dir, double len) {
  if (len <= 0) return 0.0;
  const int segs = std::clamp(static_cast<int>(std::ceil(len / 0.05)), 1, 64);
  const double w = len / segs;
  double sum = 0.0;
  for (int s = 0; s < segs; ++s) {
    const double mid = (s + 0.5) * w;
    for (std::size_t q = 0; q < kGlx.size(); ++q) {
      const double t = mid + 0.5 * w * kGlx[q];
      sum += 0.5 * w * kGlw[q] * g(y + t * dir);
    }
  }
  return sum;
}

std::vector<Point> sample_boundary(const Domain& domain, int samples) {
  std::vector<Point> pts;
  const int dim = domain.dimension();
  if (const auto* s = std::get_if<Interval>(&domain.shape())) {
    return {make_point({s->a}), make_point({s->b})};
  }
  std::mt19937_64 rng(0xb0b);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  if (const auto* s = std::get_if<HalfSpace>(&domain.shape())) {
    for (int k = 0; k < samples; ++k) {
      Point p(dim);
      for (int a = 0; a < dim; ++a) p(a) = s->point(a) + 5.0 * unif(rng);
      pts.push_back(domain.closest_point(p + s->normal));
    }
    return pts;
  }
  auto [lo, hi] = domain.bounding_box();
  const Point c = 0.5 * (lo + hi);
  const double r = domain.diameter();
  while (static_cast<int>(pts.size()) < samples) {
    Point dir(dim);
    for (int a = 0; a < dim; ++a) dir(a) = unif(rng);
    if (dir.norm() < 1e-3) continue;
    pts.push_back(domain.closest_point(c + 2.0 * r * dir.normalized()));
  }
  return pts;
}

}  // namespace

ObliqueField ObliqueField::normal(const Domain& domain, std::optional<ScalarField> g) {
  ObliqueField f;
  f.gamma = [domain](const Point& x) { return domain.extended_normal(x); };
  f.g_zero = !g.has_value();
  f.g = g ? *g : constant_field(0.0);
  f.gamma_bound = 1.0;
  f.nu = 1.0;
  f.one_sided = true;
  f.is_normal = true;
  f.g_compact = f.g_zero;
  return f;
}

FlowResult integrate_flow(const ObliqueField& field, const Domain& domain, const Point& y,
                          const FlowOptions& opts) {
  const double d0 = domain.dist_to_closure(y);
  if (d0 == 0.0) {
    FlowResult r;
    r.endpoint = y;
    r.converged = true;
    if (opts.record_path) r.path.push_back({0.0, y});
    return r;
  }
  const double gbound = std::max(field.gamma_bound, 1e-300);
  const double base = opts.step > 0 ? opts.step : std::min(0.01, opts.start_fraction * d0) / gbound;
  const double tol = opts.event_tol > 0 ? opts.event_tol : 1e-12 * domain.diameter();
  const EventFn event = [&domain](const Point& x) { return -domain.exact_signed_distance(x); };
  return integrate_until(field, event, y, base, tol, default_tau_max(field, domain, y, opts), opts);
}

Projection project(const Domain& domain, const Point& y) {
  if (!domain.convex()) throw Error(ErrorCode::NotConvex, "projection requires a convex domain");
  return Projection{domain.closest_point(y), domain.dist_to_closure(y)};
}

ExtensionData extension_data(const ObliqueField& field, const Domain& domain, const Point& y,
                             const FlowOptions& opts) {
  ExtensionData out;
  if (field.is_normal && domain.convex()) {
    const Projection p = project(domain, y);
    out.landing = p.point;
    out.tau = p.tau;
    if (p.tau > 0 && !field.g_zero) {
      out.g_integral = line_integral(field.g, y, (p.point - y) / p.tau, p.tau);
    }
    return out;
  }
  const FlowResult r = integrate_flow(field, domain, y, opts);
  out.landing = r.endpoint;
  out.tau = r.tau;
  out.g_integral = r.g_integral;
  return out;
}

double transport_extension(const ObliqueField& field, const Domain& domain,
                           const ScalarField& boundary_values, const Point& y,
                           const FlowOptions& opts) {
  const ExtensionData d = extension_data(field, domain, y, opts);
  return d.g_integral + boundary_values(d.landing);
}

double theta_time(const ObliqueField& field, const Domain& domain, double delta, const Point& y,
                  const FlowOptions& opts) {
  if (!(delta > 0)) throw Error(ErrorCode::InvalidArgument, "theta_time needs delta > 0");
  const double e0 = delta - domain.exact_signed_distance(y);
  if (e0 < 0) throw Error(ErrorCode::InvalidArgument, "theta_time point lies outside D_delta");
  const auto band_ok = [&](const Point& x) {
    if (std::abs(domain.exact_signed_distance(x)) >= delta) return true;
    return field.gamma(x).dot(domain.extended_normal(x)) > 0.5 * field.nu;
  };
  if (!band_ok(y)) {
    throw Error(ErrorCode::InvalidArgument,
                "gamma . n <= nu/2 inside the band; delta is too large for this field");
  }
  const double gbound = std::max(field.gamma_bound, 1e-300);
  const double base = opts.step > 0 ? opts.step : std::min(0.01, std::max(opts.start_fraction * e0, 1e-4)) / gbound;
  const double tol = opts.event_tol > 0 ? opts.event_tol : 1e-12 * domain.diameter();
  const EventFn event = [&domain, delta](const Point& x) {
    return delta - domain.exact_signed_distance(x);
  };
  ObliqueField no_flux = field;
  no_flux.g_zero = true;
  const FlowResult r =
      integrate_until(no_flux, event, y, base, tol, default_tau_max(field, domain, y, opts), opts);
  return 2.0 * r.tau;
}

FieldCheck check_field(const ObliqueField& field, const Domain& domain, int samples) {
  FieldCheck out;
  out.min_gamma_dot_n = std::numeric_limits<double>::infinity();
  for (const Point& p : sample_boundary(domain, samples)) {
    const Point gp = field.gamma(p);
    out.max_gamma_norm = std::max(out.max_gamma_norm, gp.norm());
    std::vector<Point> normals;
    try {
      normals.push_back(domain.normal(p));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CornerPoint) throw;
      continue;
    }
    for (const Point& n : normals) out.min_gamma_dot_n = std::min(out.min_gamma_dot_n, gp.dot(n));
  }
  out.nu_ok = out.min_gamma_dot_n >= field.nu * (1.0 - 1e-12);
  out.bound_ok = out.max_gamma_norm <= field.gamma_bound * (1.0 + 1e-12);
  if (!out.nu_ok) {
    out.messages.push_back("BC1: gamma . n = " + std::to_string(out.min_gamma_dot_n) +
                           " < nu = " + std::to_string(field.nu) + " on sampled boundary points");
  }
  if (!out.bound_ok) {
    out.messages.push_back("|gamma| = " + std::to_string(out.max_gamma_norm) +
                           " exceeds the declared bound " + std::to_string(field.gamma_bound));
  }
  return out;
}

}  // namespace nlobc
