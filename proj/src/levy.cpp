#include "nlobc/levy.hpp"

#include "gauss.hpp"
#include "nlobc/error.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace nlobc {

namespace {

constexpr double kPi = std::numbers::pi;

// Surface measure of the unit sphere in R^n (2 points in 1-D).
double sphere_area(int dim) {
  switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * kPi;
    default: return 4.0 * kPi;
  }
}

struct RadialLaw {
  bool radial = false;
  double alpha = 0.0;
  double rate = 0.0;
  double c = 0.0;
};

RadialLaw radial_law(const LevyModel& m) {
  RadialLaw r;
  if (const auto* fl = std::get_if<FractionalLaplacian>(&m.measure)) {
    r = {true, fl->alpha, 0.0, m.c_alpha()};
  } else if (const auto* ts = std::get_if<TemperedStable>(&m.measure)) {
    r = {true, ts->alpha, ts->rate, m.c_alpha()};
  }
  return r;
}

// int_a^b e^{-rate r} r^{p} dr for b possibly infinite.
double radial_power_integral(double p, double rate, double a, double b) {
  if (rate == 0.0) {
    if (std::isinf(b)) {
      if (p >= -1.0) return std::numeric_limits<double>::infinity();
      return -std::pow(a, p + 1.0) / (p + 1.0);
    }
    if (std::abs(p + 1.0) < 1e-14) return std::log(b / a);
    return (std::pow(b, p + 1.0) - std::pow(a, p + 1.0)) / (p + 1.0);
  }
  const auto f = [p, rate](double r) { return std::exp(-rate * r) * std::pow(r, p); };
  if (std::isinf(b)) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate([&](double t) { return f(a + t); }, 0.0,
                                std::numeric_limits<double>::infinity());
  }
  if (a == 0.0 && p > -1.0) {
    return std::pow(rate, -(p + 1.0)) * boost::math::tgamma_lower(p + 1.0, rate * b);
  }
  const auto& gl = detail::gauss_rule<20>();
  double s = 0.0;
  const int pieces = 64;
  const double q = std::pow(b / a, 1.0 / pieces);
  double lo = a;
  for (int k = 0; k < pieces; ++k) {
    const double hi = k + 1 == pieces ? b : lo * q;
    s += gl.integrate(lo, hi, f);
    lo = hi;
  }
  return s;
}

struct CellBox {
  double r_lo, r_hi, a_lo, a_hi, b_lo, b_hi;
  int side;
};

JumpCell integrate_cell(const LevyModel& m, int dim, const CellBox& c) {
  JumpCell out;
  out.r_lo = c.r_lo;
  out.r_hi = c.r_hi;
  out.a_lo = c.a_lo;
  out.a_hi = c.a_hi;
  out.b_lo = c.b_lo;
  out.b_hi = c.b_hi;
  out.side = c.side;
  Point m1 = Point::Zero(dim);
  SquareMatrix s2 = SquareMatrix::Zero(dim, dim);
  double mass = 0.0;
  const auto add = [&](const Point& z, double w) {
    const double rho = m.density(z) * w;
    mass += rho;
    m1 += rho * z;
    s2 += rho * z * z.transpose();
  };
  if (dim == 1) {
    const auto& g = detail::gauss_rule<8>();
    const double cr = 0.5 * (c.r_lo + c.r_hi), hr = 0.5 * (c.r_hi - c.r_lo);
    for (std::size_t i = 0; i < 8; ++i) {
      add(make_point({c.side * (cr + hr * g.x[i])}), hr * g.w[i]);
    }
  } else if (dim == 2) {
    const auto& g = detail::gauss_rule<6>();
    const double cr = 0.5 * (c.r_lo + c.r_hi), hr = 0.5 * (c.r_hi - c.r_lo);
    const double ca = 0.5 * (c.a_lo + c.a_hi), ha = 0.5 * (c.a_hi - c.a_lo);
    for (std::size_t i = 0; i < 6; ++i) {
      const double r = cr + hr * g.x[i];
      for (std::size_t j = 0; j < 6; ++j) {
        const double t = ca + ha * g.x[j];
        add(make_point({r * std::cos(t), r * std::sin(t)}), hr * ha * g.w[i] * g.w[j] * r);
      }
    }
  } else {
    const auto& g = detail::gauss_rule<4>();
    const double cr = 0.5 * (c.r_lo + c.r_hi), hr = 0.5 * (c.r_hi - c.r_lo);
    const double ca = 0.5 * (c.a_lo + c.a_hi), ha = 0.5 * (c.a_hi - c.a_lo);
    const double cb = 0.5 * (c.b_lo + c.b_hi), hb = 0.5 * (c.b_hi - c.b_lo);
    for (std::size_t i = 0; i < 4; ++i) {
      const double r = cr + hr * g.x[i];
      for (std::size_t j = 0; j < 4; ++j) {
        const double t = ca + ha * g.x[j];
        for (std::size_t k = 0; k < 4; ++k) {
          const double ph = cb + hb * g.x[k];
          const Point z = make_point(
              {r * std::sin(ph) * std::cos(t), r * std::sin(ph) * std::sin(t), r * std::cos(ph)});
          add(z, hr * ha * hb * g.w[i] * g.w[j] * g.w[k] * r * r * std::sin(ph));
        }
      }
    }
  }
  out.mass = mass;
  if (mass > 0) {
    out.barycenter = m1 / mass;
    out.covariance = s2 - m1 * m1.transpose() / mass;
  } else {
    out.barycenter = Point::Zero(dim);
    out.covariance = SquareMatrix::Zero(dim, dim);
  }
  return out;
}

// Radial nodes: dyadic shells from lo to hi, each split into `per_shell`
// equal pieces, plus the extra breakpoints.
std::vector<double> radial_nodes(double lo, double hi, int per_shell,
                                 const std::vector<double>& extra) {
  std::vector<double> r;
  double a = lo;
  while (a < hi * (1 - 1e-14)) {
    const double b = std::min(2.0 * a, hi);
    for (int k = 0; k < per_shell; ++k) r.push_back(a + (b - a) * k / per_shell);
    a = b;
  }
  r.push_back(hi);
  for (double e : extra) {
    if (e > lo && e < hi) r.push_back(e);
  }
  std::sort(r.begin(), r.end());
  std::vector<double> out;
  for (double v : r) {
    if (out.empty() || v - out.back() > 1e-12 * std::max(1.0, v)) out.push_back(v);
    else out.back() = std::max(out.back(), v);
  }
  return out;
}

struct AngularSplit {
  int per_shell;
  int na;
  int nb;
};

AngularSplit angular_split(const LevyModel& m, int dim) {
  switch (dim) {
    case 1: return {std::max(1, m.radial_nodes), 1, 1};
    case 2: return {std::max(1, m.radial_nodes / 2), std::max(4, m.angular_nodes), 1};
    default:
      return {std::max(1, m.radial_nodes / 4), std::max(4, m.angular_nodes / 2),
              std::max(2, m.angular_nodes / 4)};
  }
}

std::vector<JumpCell> build_cells(const LevyModel& m, int dim, double lo, double hi,
                                  int per_shell_override = 0) {
  AngularSplit sp = angular_split(m, dim);
  if (per_shell_override > 0) sp.per_shell = per_shell_override;
  std::vector<double> extra = {1.0};
  if (const auto* cp = std::get_if<CompoundPoisson>(&m.measure)) {
    extra.insert(extra.end(), cp->breakpoints.begin(), cp->breakpoints.end());
  }
  std::vector<double> rs;
  if (lo <= 0.0) {
    rs.clear();
    for (int k = 0; k <= 4 * sp.per_shell; ++k) rs.push_back(hi * k / (4.0 * sp.per_shell));
    for (double e : extra) {
      if (e > 0 && e < hi) rs.push_back(e);
    }
    std::sort(rs.begin(), rs.end());
    rs.erase(std::unique(rs.begin(), rs.end()), rs.end());
  } else {
    rs = radial_nodes(lo, hi, sp.per_shell, extra);
  }
  std::vector<JumpCell> cells;
  for (std::size_t k = 0; k + 1 < rs.size(); ++k) {
    const double r0 = rs[k], r1 = rs[k + 1];
    if (dim == 1) {
      for (int side : {-1, 1}) {
        JumpCell c = integrate_cell(m, dim, {r0, r1, 0, 0, 0, 0, side});
        if (c.mass > 0) cells.push_back(std::move(c));
      }
    } else if (dim == 2) {
      for (int j = 0; j < sp.na; ++j) {
        const double a0 = 2 * kPi * j / sp.na, a1 = 2 * kPi * (j + 1) / sp.na;
        JumpCell c = integrate_cell(m, dim, {r0, r1, a0, a1, 0, 0, 1});
        if (c.mass > 0) cells.push_back(std::move(c));
      }
    } else {
      for (int j = 0; j < sp.na; ++j) {
        for (int l = 0; l < sp.nb; ++l) {
          const double a0 = 2 * kPi * j / sp.na, a1 = 2 * kPi * (j + 1) / sp.na;
          const double b0 = kPi * l / sp.nb, b1 = kPi * (l + 1) / sp.nb;
          JumpCell c = integrate_cell(m, dim, {r0, r1, a0, a1, b0, b1, 1});
          if (c.mass > 0) cells.push_back(std::move(c));
        }
      }
    }
  }
  return cells;
}

// b +- sqrt(dim lambda_k) v_k over the eigenpairs of the cell covariance
// (normalized by mass): the same mass, mean and covariance as the cell, so
// the quadrature error drops to fourth order in the cell width.
std::vector<Point> split_nodes(const JumpCell& c) {
  const int dim = static_cast<int>(c.barycenter.size());
  std::vector<Point> out;
  if (!(c.mass > 0)) return out;
  const SquareMatrix cov = 0.5 * (c.covariance + c.covariance.transpose()) / c.mass;
  Eigen::SelfAdjointEigenSolver<SquareMatrix> es(cov);
  for (int k = 0; k < dim; ++k) {
    const Point v = std::sqrt(dim * std::max(es.eigenvalues()(k), 0.0)) * es.eigenvectors().col(k);
    out.push_back(c.barycenter + v);
    out.push_back(c.barycenter - v);
  }
  return out;
}

void validate_model(const LevyModel& m) {
  if (m.dimension < 1 || m.dimension > kMaxDim) {
    throw Error(ErrorCode::InvalidArgument, "Levy model dimension out of range");
  }
  const auto check_alpha = [](double a) {
    if (!(a > 0.0 && a < 2.0)) {
      throw Error(ErrorCode::NonIntegrable,
                  "alpha = " + std::to_string(a) + " outside (0, 2): int |z|^2 ^ 1 dmu diverges");
    }
  };
  if (const auto* fl = std::get_if<FractionalLaplacian>(&m.measure)) check_alpha(fl->alpha);
  if (const auto* ts = std::get_if<TemperedStable>(&m.measure)) {
    check_alpha(ts->alpha);
    if (!(ts->rate > 0)) throw Error(ErrorCode::InvalidArgument, "tempering rate must be > 0");
  }
  if (const auto* cp = std::get_if<CompoundPoisson>(&m.measure)) {
    if (!cp->density) throw Error(ErrorCode::InvalidArgument, "compound Poisson density unset");
    if (!(cp->support_radius > 0) || !std::isfinite(cp->support_radius)) {
      throw Error(ErrorCode::NonIntegrable, "compound Poisson support radius must be finite");
    }
  }
  if (!(m.trunc_radius >= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "trunc_radius must be >= 1");
  }
}

}  // namespace

double fractional_constant(int dim, double alpha) {
  return alpha * std::pow(2.0, alpha - 1.0) * std::tgamma(0.5 * (dim + alpha)) /
         (std::pow(kPi, 0.5 * dim) * std::tgamma(1.0 - 0.5 * alpha));
}

std::string LevyModel::measure_name() const {
  if (std::holds_alternative<FractionalLaplacian>(measure)) return "fractional_laplacian";
  if (std::holds_alternative<TemperedStable>(measure)) return "tempered_stable";
  return "compound_poisson";
}

double LevyModel::c_alpha() const {
  if (const auto* fl = std::get_if<FractionalLaplacian>(&measure)) {
    return fl->c_alpha > 0 ? fl->c_alpha : fractional_constant(dimension, fl->alpha);
  }
  if (const auto* ts = std::get_if<TemperedStable>(&measure)) {
    return ts->c_alpha > 0 ? ts->c_alpha : fractional_constant(dimension, ts->alpha);
  }
  return 0.0;
}

double LevyModel::density(const Point& z) const {
  if (const auto* cp = std::get_if<CompoundPoisson>(&measure)) {
    const double r = z.norm();
    if (r > cp->support_radius) return 0.0;
    return cp->density(z);
  }
  const RadialLaw law = radial_law(*this);
  const double r = z.norm();
  return law.c * std::exp(-law.rate * r) * std::pow(r, -dimension - law.alpha);
}

bool LevyModel::radial() const { return !std::holds_alternative<CompoundPoisson>(measure); }

Point LevyModel::jump(const Point& x, const Point& z) const {
  if (const auto* a = std::get_if<AffineStateJump>(&jump_map)) return a->sigma(x) * z;
  return z;
}

QuadratureTable build_quadrature(const LevyModel& model_in, int dim, double delta) {
  LevyModel model = model_in;
  model.dimension = dim;
  validate_model(model);
  if (!(delta > 0 && delta < 1)) {
    throw Error(ErrorCode::InvalidArgument,
                "delta = " + std::to_string(delta) + " must lie in (0, 1)");
  }
  QuadratureTable t;
  t.model_ = model;
  t.model_.delta = delta;
  t.delta_ = delta;
  const double R = model.trunc_radius;
  const RadialLaw law = radial_law(model);
  t.sigma_delta_ = SquareMatrix::Zero(dim, dim);
  if (law.radial) {
    const double s = law.c * sphere_area(dim) / dim *
                     radial_power_integral(1.0 - law.alpha, law.rate, 0.0, delta);
    t.sigma_delta_.diagonal().setConstant(s);
    t.tail_mass_ =
        law.c * sphere_area(dim) * radial_power_integral(-1.0 - law.alpha, law.rate, R, INFINITY);
  } else {
    const auto& cp = std::get<CompoundPoisson>(model.measure);
    for (const JumpCell& c : build_cells(model, dim, 0.0, delta)) {
      t.sigma_delta_ += c.covariance + c.mass * c.barycenter * c.barycenter.transpose();
    }
    if (cp.support_radius > R) {
      for (const JumpCell& c : build_cells(model, dim, R, cp.support_radius)) t.tail_mass_ += c.mass;
    }
  }
  const double far_hi = law.radial ? R : std::min(R, std::get<CompoundPoisson>(model.measure).support_radius);
  t.drift_ = Point::Zero(dim);
  if (delta < far_hi) t.cells_ = build_cells(model, dim, delta, far_hi);
  for (JumpCell& c : t.cells_) {
    c.split = split_nodes(c);
    if (!(c.mass >= 0) || !std::isfinite(c.mass)) {
      throw Error(ErrorCode::NonIntegrable, "far-jump cell with invalid mass");
    }
    t.far_mass_ += c.mass;
    if (c.r_hi <= 1.0 + 1e-14) t.drift_ += c.mass * c.barycenter;
  }
  // Symmetric measures have no compensator drift; drop roundoff.
  if (law.radial) t.drift_.setZero();
  return t;
}

QuadratureTable build_quadrature(const LevyModel& model_in, const Grid& grid, const Domain& domain) {
  if (domain.dimension() != grid.dimension()) {
    throw Error(ErrorCode::InvalidArgument, "grid and domain dimensions differ");
  }
  const double h = grid.h();
  const double delta = model_in.delta > 0 ? model_in.delta : std::max(h, 0.1 * std::sqrt(h));
  if (delta > model_in.delta_safety * h) {
    throw Error(ErrorCode::DeltaTooLarge, "delta = " + std::to_string(delta) + " exceeds " +
                                              std::to_string(model_in.delta_safety) + " h");
  }
  QuadratureTable t = build_quadrature(model_in, grid.dimension(), delta);
  t.grid_ = &grid;
  t.correction_radius_ = std::max(2.0 * delta, 32.0 * h);
  return t;
}

SquareMatrix QuadratureTable::small_jump_second_moment(const Point& x) const {
  if (const auto* a = std::get_if<AffineStateJump>(&model_.jump_map)) {
    const SquareMatrix s = a->sigma(x);
    return s * sigma_delta_ * s.transpose();
  }
  return sigma_delta_;
}

Point QuadratureTable::compensator_drift(const Point& x) const {
  if (const auto* a = std::get_if<AffineStateJump>(&model_.jump_map)) return a->sigma(x) * drift_;
  return drift_;
}

std::vector<FarNode> QuadratureTable::far_nodes(const Point& x) const {
  std::vector<FarNode> out;
  out.reserve(cells_.size());
  for (const JumpCell& c : cells_) out.push_back({x + model_.jump(x, c.barycenter), c.mass});
  return out;
}

NonlocalStencil nonlocal_stencil(const QuadratureTable& table, int node,
                                 const ExteriorClosure& closure) {
  const Grid* grid = table.grid();
  if (!grid) throw Error(ErrorCode::InvalidArgument, "quadrature table has no grid");
  const int dim = grid->dimension();
  const double h = grid->h();
  const Point x = grid->node(node);
  const LevyModel& m = table.model();
  const auto* affine = std::get_if<AffineStateJump>(&m.jump_map);
  SquareMatrix sig;
  if (affine) sig = affine->sigma(x);

  NonlocalStencil st;
  st.sigma_eff = table.small_jump_second_moment(x);
  st.drift = table.compensator_drift(x);
  std::vector<std::pair<int, double>> terms;
  terms.reserve(table.cells().size() * (1u << dim));
  const Point& lo = grid->node_lo();
  const auto add_closure = [&](const Point& y, double w) {
    if (!closure) {
      throw Error(ErrorCode::ClosureRequired,
                  "jump landing outside the computational box needs an exterior closure");
    }
    const LinearForm f = closure(y);
    st.far.constant += w * f.constant;
    for (const auto& [j, c] : f.terms) terms.emplace_back(j, w * c);
  };
  for (const JumpCell& c : table.cells()) {
    const double w = c.mass;
    const Point b = affine ? Point(sig * c.barycenter) : c.barycenter;
    const Point y = x + b;
    st.far_mass += w;
    const bool near = c.r_hi <= table.correction_radius();
    if (near) st.sigma_eff += affine ? SquareMatrix(sig * c.covariance * sig.transpose()) : c.covariance;
    if (!near && !c.split.empty()) {
      const double ws = w / c.split.size();
      for (const Point& z : c.split) {
        const Point ys = x + (affine ? Point(sig * z) : z);
        if (grid->contains(ys)) {
          for (const auto& [j, c2] : grid->interpolate(ys).terms) terms.emplace_back(j, ws * c2);
        } else {
          add_closure(ys, ws);
        }
      }
      continue;
    }
    if (grid->contains(y)) {
      const LinearForm f = grid->interpolate(y);
      for (const auto& [j, c2] : f.terms) terms.emplace_back(j, w * c2);
      for (int a = 0; a < dim && near; ++a) {
        const double t = (y(a) - lo(a)) / h;
        const double s = t - std::floor(t);
        st.sigma_eff(a, a) -= w * s * (1.0 - s) * h * h;
      }
    } else {
      add_closure(y, w);
    }
  }
  if (m.fold_tail && table.tail_mass() > 0) {
    const double far = 2.0 * m.trunc_radius;
    std::vector<Point> dirs;
    for (int a = 0; a < dim; ++a) {
      for (int s : {-1, 1}) {
        Point e = Point::Zero(dim);
        e(a) = s;
        dirs.push_back(e);
      }
    }
    const double w = table.tail_mass() / dirs.size();
    for (const Point& e : dirs) {
      const Point y = x + far * e;
      if (grid->contains(y)) {
        for (const auto& [j, c2] : grid->interpolate(y).terms) terms.emplace_back(j, w * c2);
      } else {
        add_closure(y, w);
      }
    }
    st.far_mass += table.tail_mass();
  }
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& t : terms) {
    if (!st.far.terms.empty() && st.far.terms.back().first == t.first) {
      st.far.terms.back().second += t.second;
    } else {
      st.far.terms.push_back(t);
    }
  }
  // Moment corrections can leave Sigma_eff slightly indefinite; project to PSD.
  st.sigma_eff = 0.5 * (st.sigma_eff + st.sigma_eff.transpose()).eval();
  if (dim == 1) {
    st.sigma_eff(0, 0) = std::max(st.sigma_eff(0, 0), 0.0);
  } else {
    Eigen::SelfAdjointEigenSolver<SquareMatrix> es(st.sigma_eff);
    if (es.eigenvalues().minCoeff() < 0) {
      const Point ev = es.eigenvalues().cwiseMax(0.0);
      st.sigma_eff = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }
  }
  return st;
}

double apply_nonlocal(const QuadratureTable& table, const Eigen::VectorXd& u,
                      const ExteriorClosure& closure, int node) {
  const Grid* grid = table.grid();
  const NonlocalStencil st = nonlocal_stencil(table, node, closure);
  const int dim = grid->dimension();
  const double h = grid->h();
  const Point x = grid->node(node);
  const auto value = [&](const std::array<int, kMaxDim>& off) {
    const int j = grid->offset(node, off);
    if (j >= 0) return u[j];
    if (!closure) {
      throw Error(ErrorCode::ClosureRequired, "difference stencil leaves the computational box");
    }
    Point y = x;
    for (int a = 0; a < dim; ++a) y(a) += off[a] * h;
    return closure(y)(u);
  };
  const double ui = u[node];
  double out = st.far(u) - st.far_mass * ui;
  for (int a = 0; a < dim; ++a) {
    std::array<int, kMaxDim> p{0, 0, 0}, q{0, 0, 0};
    p[a] = 1;
    q[a] = -1;
    const double up = value(p), um = value(q);
    out += 0.5 * st.sigma_eff(a, a) * (up - 2 * ui + um) / (h * h);
    out -= st.drift(a) * (up - um) / (2 * h);
    for (int b = a + 1; b < dim; ++b) {
      std::array<int, kMaxDim> pp{0, 0, 0}, pm{0, 0, 0}, mp{0, 0, 0}, mm{0, 0, 0};
      pp[a] = 1, pp[b] = 1;
      pm[a] = 1, pm[b] = -1;
      mp[a] = -1, mp[b] = 1;
      mm[a] = -1, mm[b] = -1;
      const double cross = (value(pp) - value(pm) - value(mp) + value(mm)) / (4 * h * h);
      out += st.sigma_eff(a, b) * cross;
    }
  }
  return out;
}

IntegrabilityReport check_exterior_integrability(const LevyModel& model_in,
                                                 const ObliqueField& field, const Domain& domain) {
  LevyModel model = model_in;
  model.dimension = domain.dimension();
  validate_model(model);
  IntegrabilityReport rep;
  const int dim = model.dimension;
  const double delta = model.delta > 0 ? model.delta : 0.1;
  const double jb = std::holds_alternative<AffineStateJump>(model.jump_map)
                        ? std::get<AffineStateJump>(model.jump_map).bound
                        : 1.0;
  const RadialLaw law = radial_law(model);
  if (law.radial) {
    const double s = law.c * sphere_area(dim);
    rep.levy_moment = s * (radial_power_integral(1.0 - law.alpha, law.rate, 0.0, 1.0) +
                           radial_power_integral(-1.0 - law.alpha, law.rate, 1.0, INFINITY));
    rep.first_moment = jb * s * radial_power_integral(-law.alpha, law.rate, delta, INFINITY);
  } else {
    const auto& cp = std::get<CompoundPoisson>(model.measure);
    for (const JumpCell& c : build_cells(model, dim, 0.0, cp.support_radius, 64)) {
      const double r2 = (c.covariance.trace() + c.mass * c.barycenter.squaredNorm());
      rep.levy_moment += c.r_hi <= 1.0 + 1e-14 ? r2 : c.mass;
      if (c.r_lo >= delta - 1e-14) rep.first_moment += jb * c.mass * 0.5 * (c.r_lo + c.r_hi);
    }
  }
  if (!std::isfinite(rep.levy_moment)) {
    rep.ok = false;
    rep.message = "Levy measure: int (|z|^2 ^ 1) dmu diverges";
    return rep;
  }
  if (field.g_compact || field.g_zero) {
    rep.message = "BC3 ok: g has compact support";
    return rep;
  }
  if (!std::isfinite(rep.first_moment)) {
    rep.ok = false;
    rep.message =
        "BC3: g is not compactly supported and int_{|z|>=delta} |j(x,z)| dmu(z) diverges "
        "(first tail moment infinite)";
  } else {
    rep.message = "BC3 ok: first tail moment " + std::to_string(rep.first_moment) + " is finite";
  }
  return rep;
}

}  // namespace nlobc
