#include "nlobc/mc_oracle.hpp"

#include "nlobc/error.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace nlobc {

namespace {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream of path `index`: depends only on (seed, index), never on scheduling.
Rng path_rng(std::uint64_t seed, long index) {
  return Rng(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(index)));
}

double sphere_area(int dim) {
  constexpr double pi = std::numbers::pi;
  return dim == 1 ? 2.0 : dim == 2 ? 2.0 * pi : 4.0 * pi;
}

Point random_direction(int dim, Rng& rng) {
  if (dim == 1) return make_point({std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : -1.0});
  std::normal_distribution<double> n01;
  Point v(dim);
  do {
    for (int a = 0; a < dim; ++a) v(a) = n01(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

// Samples z from mu restricted to delta <= |z| < R (plus the folded tail).
// Radial laws are sampled exactly: |z| by inverse CDF of r^{-1-alpha},
// tempering by rejection. Compound Poisson samples a table cell by mass and
// then a point in the cell by rejection against a sampled density bound.
class FarJumpSampler {
 public:
  FarJumpSampler(const QuadratureTable& table, int dim) : table_(table), dim_(dim) {
    const LevyModel& m = table.model();
    delta_ = table.delta();
    R_ = m.trunc_radius;
    if (const auto* fl = std::get_if<FractionalLaplacian>(&m.measure)) {
      kind_ = Kind::Stable;
      alpha_ = fl->alpha;
      mass_ = m.c_alpha() * sphere_area(dim) * (std::pow(delta_, -alpha_) - std::pow(R_, -alpha_)) /
              alpha_;
    } else if (const auto* ts = std::get_if<TemperedStable>(&m.measure)) {
      kind_ = Kind::Tempered;
      alpha_ = ts->alpha;
      rate_ = ts->rate;
      mass_ = table.far_mass();
    } else {
      kind_ = Kind::Cells;
      mass_ = table.far_mass();
      double acc = 0.0;
      for (const JumpCell& c : table.cells()) {
        acc += c.mass;
        cum_.push_back(acc);
        bound_.push_back(1.5 * cell_density_bound(c));
      }
    }
    if (m.fold_tail) tail_ = table.tail_mass();
  }

  double mass() const { return mass_ + tail_; }

  Point sample(Rng& rng) const {
    std::uniform_real_distribution<double> u01;
    if (tail_ > 0 && u01(rng) * mass() < tail_) {
      // Folded tail: the solver places it at distance 2R along the axes.
      const int a = std::uniform_int_distribution<int>(0, dim_ - 1)(rng);
      Point z = Point::Zero(dim_);
      z(a) = (u01(rng) < 0.5 ? -2.0 : 2.0) * R_;
      return z;
    }
    switch (kind_) {
      case Kind::Stable: return random_direction(dim_, rng) * stable_radius(rng);
      case Kind::Tempered:
        for (;;) {
          const double r = stable_radius(rng);
          if (u01(rng) <= std::exp(-rate_ * (r - delta_))) return random_direction(dim_, rng) * r;
        }
      case Kind::Cells: break;
    }
    const double target = u01(rng) * cum_.back();
    std::size_t k = static_cast<std::size_t>(
        std::upper_bound(cum_.begin(), cum_.end(), target) - cum_.begin());
    k = std::min(k, cum_.size() - 1);
    const JumpCell& c = table_.cells()[k];
    for (;;) {
      const Point z = uniform_in_cell(c, rng);
      if (u01(rng) * bound_[k] <= table_.model().density(z)) return z;
    }
  }

 private:
  enum class Kind { Stable, Tempered, Cells };

  double stable_radius(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>()(rng);
    const double a = std::pow(delta_, -alpha_), b = std::pow(R_, -alpha_);
    return std::pow(a - u * (a - b), -1.0 / alpha_);
  }

  // Uniform with respect to Lebesgue measure in the cell.
  Point uniform_in_cell(const JumpCell& c, Rng& rng) const {
    std::uniform_real_distribution<double> u01;
    const double p0 = std::pow(c.r_lo, dim_), p1 = std::pow(c.r_hi, dim_);
    const double r = std::pow(p0 + u01(rng) * (p1 - p0), 1.0 / dim_);
    if (dim_ == 1) return make_point({c.side * r});
    const double t = c.a_lo + u01(rng) * (c.a_hi - c.a_lo);
    if (dim_ == 2) return make_point({r * std::cos(t), r * std::sin(t)});
    const double c0 = std::cos(c.b_hi), c1 = std::cos(c.b_lo);
    const double cp = c0 + u01(rng) * (c1 - c0);
    const double sp = std::sqrt(std::max(0.0, 1.0 - cp * cp));
    return make_point({r * sp * std::cos(t), r * sp * std::sin(t), r * cp});
  }

  double cell_density_bound(const JumpCell& c) const {
    const int n = 6;
    double m = 0.0;
    const auto lerp = [](double lo, double hi, int k) { return lo + (hi - lo) * k / (n - 1); };
    for (int i = 0; i < n; ++i) {
      const double r = lerp(c.r_lo, c.r_hi, i);
      if (dim_ == 1) {
        m = std::max(m, table_.model().density(make_point({c.side * r})));
        continue;
      }
      for (int j = 0; j < n; ++j) {
        const double t = lerp(c.a_lo, c.a_hi, j);
        if (dim_ == 2) {
          m = std::max(m, table_.model().density(make_point({r * std::cos(t), r * std::sin(t)})));
          continue;
        }
        for (int k = 0; k < n; ++k) {
          const double p = lerp(c.b_lo, c.b_hi, k);
          m = std::max(m, table_.model().density(make_point(
                              {r * std::sin(p) * std::cos(t), r * std::sin(p) * std::sin(t),
                               r * std::cos(p)})));
        }
      }
    }
    return m;
  }

  const QuadratureTable& table_;
  int dim_;
  Kind kind_ = Kind::Stable;
  double delta_ = 0.0, R_ = 0.0, alpha_ = 1.0, rate_ = 0.0;
  double mass_ = 0.0, tail_ = 0.0;
  std::vector<double> cum_;
  std::vector<double> bound_;
};

SquareMatrix psd_sqrt(const SquareMatrix& c) {
  const int n = static_cast<int>(c.rows());
  if (n == 1) return SquareMatrix::Constant(1, 1, std::sqrt(std::max(0.0, c(0, 0))));
  Eigen::SelfAdjointEigenSolver<SquareMatrix> es(c);
  const Point ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace

McEstimate simulate_value(const Nonlinearity& nl, const std::optional<LevyModel>& levy,
                          const ObliqueField& field, const Domain& domain, const Point& x0,
                          const JumpProcessConfig& cfg) {
  if (!nl.is_linear()) {
    throw Error(ErrorCode::InvalidArgument, "the Monte Carlo oracle needs a linear F");
  }
  if (!domain.bounded() && !domain.convex()) {
    throw Error(ErrorCode::InvalidArgument, "the Monte Carlo oracle needs a bounded or convex domain");
  }
  if (cfg.n_paths < 2) throw Error(ErrorCode::InvalidArgument, "n_paths must be >= 2");
  if (!(cfg.time_step > 0) || !(cfg.max_step >= cfg.time_step)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 < time_step <= max_step");
  }
  const int dim = domain.dimension();
  if (x0.size() != dim) throw Error(ErrorCode::InvalidArgument, "start point has wrong dimension");
  const double lambda0 = nl.lambda0();
  const LinearRecord rec = complete_record(nl.records().front(), dim, lambda0);

  const double T = cfg.horizon > 0
                       ? cfg.horizon
                       : 1.000001 * std::log(100.0 / cfg.target_accuracy) / lambda0;
  if (!(std::exp(-lambda0 * T) < 0.01 * cfg.target_accuracy)) {
    std::ostringstream os;
    os << "exp(-lambda0 T) = " << std::exp(-lambda0 * T) << " is not below 0.01 * "
       << cfg.target_accuracy << " (T = " << T << ")";
    throw Error(ErrorCode::HorizonTooShort, os.str());
  }

  std::optional<QuadratureTable> table;
  std::optional<FarJumpSampler> sampler;
  double intensity = 0.0;
  if (levy && rec.a != 0.0) {
    if (rec.a < 0) throw Error(ErrorCode::InvalidArgument, "nonlocal weight a must be >= 0");
    const double delta = cfg.delta > 0 ? cfg.delta : levy->delta;
    if (!(delta > 0)) {
      throw Error(ErrorCode::InvalidArgument, "the Monte Carlo oracle needs an explicit delta");
    }
    table.emplace(build_quadrature(*levy, dim, delta));
    sampler.emplace(*table, dim);
    intensity = rec.a * sampler->mass();
    if (cfg.time_step * intensity > 0.1) {
      std::ostringstream os;
      os << "time_step * jump intensity = " << cfg.time_step * intensity << " exceeds 0.1";
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
  }
  const double a = rec.a;
  // Without A, b or small jumps the state only moves by jumps, so whole
  // inter-jump intervals are exact under frozen coefficients.
  const bool diffusive = static_cast<bool>(nl.records().front().A) ||
                         static_cast<bool>(nl.records().front().b) ||
                         (table && (table->sigma_delta().norm() > 0 || table->drift().norm() > 0));

  const bool bridge_ok = domain.bounded() || domain.convex();

  std::vector<double> payoff(static_cast<std::size_t>(cfg.n_paths));
  const auto run_path = [&](int index) {
    Rng rng = path_rng(cfg.rng_seed, index);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    std::exponential_distribution<double> expo(intensity > 0 ? intensity : 1.0);
    Point X = x0;
    double log_disc = 0.0, pay = 0.0, t = 0.0;
    const auto relocate = [&] {
      if (domain.dist_to_closure(X) == 0.0) return;
      const ExtensionData e = extension_data(field, domain, X, cfg.flow);
      if (!field.g_zero) pay += std::exp(-log_disc) * e.g_integral;
      X = e.landing;
    };
    relocate();
    SquareMatrix L, last_cov;
    double last_dist = -1.0;
    double next_jump = intensity > 0 ? expo(rng) : std::numeric_limits<double>::infinity();
    while (t < T) {
      double dt = std::min(T - t, next_jump - t);
      const double lam = rec.lambda(X);
      Point mu;
      if (diffusive) {
        SquareMatrix cov = 2.0 * rec.A(X);
        mu = rec.b(X);
        if (table) {
          cov += a * table->small_jump_second_moment(X);
          mu -= a * table->compensator_drift(X);
        }
        if (last_cov.size() != cov.size() || cov != last_cov) {
          last_cov = cov;
          L = psd_sqrt(cov);
        }
        double step = cfg.time_step;
        const double dist = domain.bounded() || domain.convex() ? domain.exact_signed_distance(X) : 0.0;
        last_dist = bridge_ok ? dist : -1.0;
        if (dist > 0) {
          // Large steps only where an exit within the step is negligible.
          double grow = dist * dist / (16.0 * std::max(cov.trace(), 1e-300));
          if (mu.norm() > 0) grow = std::min(grow, dist / (4.0 * mu.norm()));
          step = std::max(step, std::min(cfg.max_step, grow));
        }
        dt = std::min(dt, step);
      }
      const bool jump_now = t + dt >= next_jump;
      pay += std::exp(-log_disc) * rec.f(X) * (-std::expm1(-lam * dt)) / lam;
      log_disc += lam * dt;
      if (diffusive) {
        Point xi(dim);
        for (int k = 0; k < dim; ++k) xi(k) = n01(rng);
        const Point dX = mu * dt + L * xi * std::sqrt(dt);
        // Bridge correction in the local half-space: the normal coordinate's
        // running minimum over the step gives the pushing the endpoint misses.
        double extra = 0.0;
        Point n0;
        if (cfg.boundary_bridge && bridge_ok && last_dist >= 0) {
          try {
            n0 = domain.extended_normal(X);
            const double s2 = n0.dot(last_cov * n0) * dt;
            if (s2 > 0 && 2.0 * last_dist * last_dist < 40.0 * s2) {
              const double d1 = last_dist - n0.dot(dX);
              const double m =
                  0.5 * ((last_dist + d1) - std::sqrt((last_dist - d1) * (last_dist - d1) -
                                                      2.0 * s2 * std::log1p(-u01(rng))));
              if (m < 0) extra = -m - std::max(0.0, -d1);
            }
          } catch (const Error& e) {
            if (e.code() != ErrorCode::CornerPoint) throw;
          }
        }
        X += dX;
        relocate();
        if (extra > 0) {
          const Point gam = field.gamma(X);
          const double s = extra / std::max(gam.dot(n0), field.nu);
          if (!field.g_zero) pay += std::exp(-log_disc) * field.g(X) * s;
          X -= s * gam;
          relocate();
        }
      }
      t = jump_now ? next_jump : t + dt;
      if (jump_now) {
        X += levy->jump(X, sampler->sample(rng));
        relocate();
        next_jump += expo(rng);
      }
    }
    // Frozen-coefficient continuation beyond the horizon.
    pay += std::exp(-log_disc) * rec.f(X) / rec.lambda(X);
    payoff[static_cast<std::size_t>(index)] = pay;
  };
  detail::parallel_for(static_cast<int>(cfg.n_paths), cfg.threads, run_path);

  // Sequential reduction in path order keeps the result bit-reproducible.
  // Shifted by the first payoff, so identical payoffs give exactly zero spread.
  const double shift = payoff.front();
  double sum = 0.0, sum2 = 0.0;
  for (double p : payoff) {
    sum += p - shift;
    sum2 += (p - shift) * (p - shift);
  }
  const double n = static_cast<double>(cfg.n_paths);
  const double ss = std::max(0.0, sum2 - sum * sum / n);
  McEstimate out;
  out.estimate = shift + sum / n;
  out.std_error = std::sqrt(ss / (n - 1) / n);
  out.n_paths = cfg.n_paths;
  out.horizon = T;
  out.jump_intensity = intensity;
  return out;
}

}  // namespace nlobc
