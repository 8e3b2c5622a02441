#include "nlobc/solver.hpp"

#include "nlobc/error.hpp"

#include "parallel.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nlobc {

namespace {

using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Row {
  std::vector<std::pair<int, double>> e;
  double rhs = 0.0;

  void add(int j, double v) {
    if (v != 0.0) e.emplace_back(j, v);
  }

  void merge() {
    std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, double>> out;
    out.reserve(e.size());
    for (const auto& t : e) {
      if (!out.empty() && out.back().first == t.first) out.back().second += t.second;
      else out.push_back(t);
    }
    e = std::move(out);
  }

  void scale(double s) {
    for (auto& t : e) t.second *= s;
    rhs *= s;
  }
};

using detail::parallel_for;

RowMatrix to_matrix(int n, const std::vector<Row>& rows) {
  std::vector<Eigen::Triplet<double>> trips;
  std::size_t nnz = 0;
  for (const auto& r : rows) nnz += r.e.size();
  trips.reserve(nnz);
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    for (const auto& [j, v] : rows[i].e) trips.emplace_back(i, j, v);
  }
  RowMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

void check_monotone(const Grid& grid, const Row& row, int i, const std::string& what) {
  double diag = 0.0;
  for (const auto& [j, v] : row.e) {
    if (j == i) diag = v;
  }
  const double tol = 1e-12 * std::max(1.0, std::abs(diag));
  for (const auto& [j, v] : row.e) {
    if (j != i && v > tol) {
      std::ostringstream os;
      os << what << " row of node " << i << " at x = (" << grid.node(i).transpose()
         << ") has positive off-diagonal coefficient " << v << " on node " << j;
      throw Error(ErrorCode::MonotonicityViolation, os.str());
    }
  }
}

// Upwinded c . Du: backward difference for c_a > 0, forward for c_a < 0.
// Missing neighbors reflect onto the node itself.
void add_upwind(Row& row, const Grid& grid, int i, const Point& c, double factor) {
  const double h = grid.h();
  for (int a = 0; a < grid.dimension(); ++a) {
    const double ca = factor * c(a);
    if (ca > 0) {
      const int j = grid.neighbor(i, a, -1);
      if (j < 0) continue;
      row.add(i, ca / h);
      row.add(j, -ca / h);
    } else if (ca < 0) {
      const int j = grid.neighbor(i, a, 1);
      if (j < 0) continue;
      row.add(j, ca / h);
      row.add(i, -ca / h);
    }
  }
}

// -Tr(Q D2 u) with the monotone (Kushner) stencil.
void add_diffusion(Row& row, const Grid& grid, int i, const SquareMatrix& Q) {
  const int dim = grid.dimension();
  const double h2 = grid.h() * grid.h();
  const auto nb = [&](std::array<int, kMaxDim> off) {
    const int j = grid.offset(i, off);
    return j < 0 ? i : j;
  };
  for (int a = 0; a < dim; ++a) {
    double q = Q(a, a);
    for (int b = 0; b < dim; ++b) {
      if (b != a) q -= std::abs(0.5 * (Q(a, b) + Q(b, a)));
    }
    if (q == 0.0) continue;
    std::array<int, kMaxDim> p{0, 0, 0}, m{0, 0, 0};
    p[a] = 1;
    m[a] = -1;
    row.add(nb(p), -q / h2);
    row.add(nb(m), -q / h2);
    row.add(i, 2 * q / h2);
  }
  for (int a = 0; a < dim; ++a) {
    for (int b = a + 1; b < dim; ++b) {
      const double qab = 0.5 * (Q(a, b) + Q(b, a));
      if (qab == 0.0) continue;
      std::array<int, kMaxDim> p{0, 0, 0}, m{0, 0, 0};
      p[a] = 1;
      m[a] = -1;
      p[b] = qab > 0 ? 1 : -1;
      m[b] = qab > 0 ? -1 : 1;
      const double q = std::abs(qab);
      row.add(nb(p), -q / h2);
      row.add(nb(m), -q / h2);
      row.add(i, 2 * q / h2);
    }
  }
}

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

Eigen::VectorXd linear_solve(const RowMatrix& J, const Eigen::VectorXd& r, int dim) {
  const auto direct = [&] {
    Eigen::SparseMatrix<double> Jc = J;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(Jc);
    lu.factorize(Jc);
    if (lu.info() != Eigen::Success) {
      throw Error(ErrorCode::NoConvergence, "sparse LU factorization failed: " + lu.lastErrorMessage());
    }
    Eigen::VectorXd x = lu.solve(r);
    return x;
  };
  if (dim == 1 || J.rows() < 4000) return direct();
  Eigen::BiCGSTAB<RowMatrix, Eigen::IncompleteLUT<double>> it;
  it.preconditioner().setDroptol(1e-6);
  it.preconditioner().setFillfactor(20);
  it.setTolerance(1e-14);
  it.setMaxIterations(2000);
  it.compute(J);
  if (it.info() == Eigen::Success) {
    Eigen::VectorXd x = it.solve(r);
    if (it.info() == Eigen::Success || (J * x - r).lpNorm<Eigen::Infinity>() <=
                                           1e-10 * std::max(1.0, r.lpNorm<Eigen::Infinity>())) {
      return x;
    }
  }
  return direct();
}

double sup_over(const Eigen::VectorXd& v, const std::vector<char>& mask) {
  double m = 0.0;
  for (int i = 0; i < v.size(); ++i) {
    if (mask[i]) m = std::max(m, std::abs(v[i]));
  }
  return m;
}

void fill_bound(const Problem& p, const Discretization& d, Solution& s) {
  if (!p.field.g_zero) return;
  const Grid& g = *p.grid;
  const int dim = g.dimension();
  const Point p0 = Point::Zero(dim);
  const SquareMatrix X0 = SquareMatrix::Zero(dim, dim);
  double mf = 0.0;
  for (int i = 0; i < g.size(); ++i) {
    if (d.carries_equation[i]) mf = std::max(mf, std::abs(p.nl.evaluate(g.node(i), 0, p0, X0, 0)));
  }
  s.bound = mf / p.nl.lambda0();
  s.bound_checked = true;
  s.bound_ok = s.values.lpNorm<Eigen::Infinity>() <= s.bound + p.config.bound_tol;
}

std::string history_tail(const std::vector<double>& h) {
  std::ostringstream os;
  os << "residual history (last entries):";
  const std::size_t from = h.size() > 8 ? h.size() - 8 : 0;
  for (std::size_t k = from; k < h.size(); ++k) os << ' ' << h[k];
  return os.str();
}

}  // namespace

const char* to_string(BcMode m) {
  return m == BcMode::Penalized ? "penalized" : "direct";
}

const char* to_string(IterationKind k) {
  return k == IterationKind::Policy ? "policy" : "explicit";
}

std::vector<double> default_kappa_schedule() {
  std::vector<double> k;
  for (double v = 1.0; v >= 1.0 / 1024 - 1e-15; v /= 4) k.push_back(v);
  return k;
}

Problem Problem::make(const Domain& domain, const GridOptions& grid, Nonlinearity nl,
                      std::optional<LevyModel> levy, ObliqueField field, SolverConfig config) {
  Problem p;
  p.domain = domain;
  p.grid = std::make_shared<const Grid>(Grid::build(domain, grid));
  p.nl = std::move(nl);
  if (!field.gamma) field = ObliqueField::normal(domain);
  if (!field.g) {
    field.g = constant_field(0.0);
    field.g_zero = true;
  }
  p.field = std::move(field);
  for (std::size_t k = 1; k < config.kappa_schedule.size(); ++k) {
    if (!(config.kappa_schedule[k] < config.kappa_schedule[k - 1])) {
      throw Error(ErrorCode::InvalidArgument, "kappa schedule must be strictly decreasing");
    }
  }
  for (double k : config.kappa_schedule) {
    if (!(k > 0)) throw Error(ErrorCode::InvalidArgument, "kappa values must be positive");
  }
  p.config = std::move(config);
  if (levy) {
    levy->dimension = domain.dimension();
    p.levy = levy;
    p.table = std::make_shared<const QuadratureTable>(build_quadrature(*levy, *p.grid, domain));
  }
  return p;
}

bool Problem::in_closure(int node) const {
  return grid->dist_to_closure(node) <= 1e-6 * grid->h();
}

void Discretization::set_kappa(double kappa) {
  if (mode == BcMode::Penalized) boundary_scale = 1.0 / kappa;
}

Eigen::VectorXd Discretization::residual(const Eigen::VectorXd& u) const {
  const int n = size();
  Eigen::VectorXd r = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const Eigen::VectorXd rk = controls[k] * u - rhs[k];
    r = r.cwiseMax(rk);
  }
  for (int i = 0; i < n; ++i) {
    if (!carries_equation[i]) r[i] = 0.0;
  }
  r += boundary_scale * (boundary * u - boundary_rhs);
  return r;
}

std::vector<int> Discretization::policy(const Eigen::VectorXd& u) const {
  const int n = size();
  std::vector<int> pol(n, 0);
  if (controls.size() == 1) return pol;
  Eigen::VectorXd best = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const Eigen::VectorXd rk = controls[k] * u - rhs[k];
    for (int i = 0; i < n; ++i) {
      if (rk[i] > best[i]) {
        best[i] = rk[i];
        pol[i] = static_cast<int>(k);
      }
    }
  }
  return pol;
}

RowMatrix Discretization::jacobian(const std::vector<int>& pol) const {
  const int n = size();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(controls[0].nonZeros() + boundary.nonZeros());
  for (int i = 0; i < n; ++i) {
    if (carries_equation[i]) {
      for (RowMatrix::InnerIterator it(controls[pol[i]], i); it; ++it) {
        trips.emplace_back(i, static_cast<int>(it.col()), it.value());
      }
    }
    for (RowMatrix::InnerIterator it(boundary, i); it; ++it) {
      trips.emplace_back(i, static_cast<int>(it.col()), boundary_scale * it.value());
    }
  }
  RowMatrix J(n, n);
  J.setFromTriplets(trips.begin(), trips.end());
  J.makeCompressed();
  return J;
}

double Discretization::max_diagonal() const {
  double m = 0.0;
  for (int i = 0; i < size(); ++i) {
    double b = boundary_scale * boundary.coeff(i, i);
    double c = 0.0;
    if (carries_equation[i]) {
      for (const auto& M : controls) c = std::max(c, M.coeff(i, i));
    }
    m = std::max(m, b + c);
  }
  return m;
}

ExteriorClosure exterior_closure(const Problem& problem) {
  auto grid = problem.grid;
  if (problem.config.bc_mode == BcMode::Penalized) {
    return [grid](const Point& y) { return grid->interpolate(y); };
  }
  const ObliqueField field = problem.field;
  const Domain domain = problem.domain;
  const FlowOptions opts = problem.config.flow;
  return [grid, field, domain, opts](const Point& y) {
    const ExtensionData d = extension_data(field, domain, y, opts);
    LinearForm f = grid->interpolate(d.landing);
    f.constant = d.g_integral;
    return f;
  };
}

Discretization discretize(const Problem& problem, double kappa) {
  const Grid& grid = *problem.grid;
  const int n = grid.size();
  const int dim = grid.dimension();
  const SolverConfig& cfg = problem.config;
  const bool direct = cfg.bc_mode == BcMode::DirectExtension;
  const auto& records = problem.nl.records();
  const std::size_t K = records.size();
  const bool nonlocal = problem.table &&
                        std::any_of(records.begin(), records.end(), [](const auto& r) { return r.a != 0.0; });
  const ExteriorClosure closure = exterior_closure(problem);

  Discretization d;
  d.mode = cfg.bc_mode;
  d.carries_equation.assign(n, 1);
  if (direct) {
    for (int i = 0; i < n; ++i) d.carries_equation[i] = problem.in_closure(i) ? 1 : 0;
  }

  const bool flatten = !direct && problem.oblique();
  Point center = 0.5 * (grid.box_lo() + grid.box_hi());
  double r_flat = cfg.flatten_radius;
  if (flatten && r_flat < 0) {
    const double half = 0.5 * (grid.box_hi() - grid.box_lo()).minCoeff();
    double dom_r = 0.0;
    if (problem.domain.bounded()) {
      auto [lo, hi] = problem.domain.bounding_box();
      for (int c = 0; c < (1 << dim); ++c) {
        Point v(dim);
        for (int a = 0; a < dim; ++a) v(a) = ((c >> a) & 1) ? hi(a) : lo(a);
        dom_r = std::max(dom_r, (v - center).norm());
      }
    }
    r_flat = std::max(half - 2.0, dom_r);
  }

  std::vector<std::vector<Row>> ctrl(K, std::vector<Row>(n));
  std::vector<Row> bnd(n);
  parallel_for(n, cfg.threads, [&](int i) {
    const Point x = grid.node(i);
    if (d.carries_equation[i]) {
      std::optional<NonlocalStencil> st;
      if (nonlocal) st = nonlocal_stencil(*problem.table, i, closure);
      const double s = flatten ? smoothstep((x - center).norm() - r_flat) : 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const LinearRecord& rec = records[k];
        Row& row = ctrl[k][i];
        SquareMatrix Q = rec.A ? rec.A(x) : SquareMatrix(SquareMatrix::Zero(dim, dim));
        Point c = rec.b ? Point(-rec.b(x)) : Point(Point::Zero(dim));
        if (st && rec.a != 0.0) {
          Q += 0.5 * rec.a * st->sigma_eff;
          c += rec.a * st->drift;
          for (const auto& [j, w] : st->far.terms) row.add(j, -rec.a * w);
          row.add(i, rec.a * st->far_mass);
          row.rhs += rec.a * st->far.constant;
        }
        add_upwind(row, grid, i, c, 1.0);
        add_diffusion(row, grid, i, Q);
        row.add(i, rec.lambda(x));
        row.rhs += rec.f(x);
        if (s > 0) {
          row.scale(1.0 - s);
          row.add(i, s * problem.nl.lambda0());
        }
        row.merge();
        if (cfg.check_monotonicity) check_monotone(grid, row, i, "equation");
      }
    }
    Row& b = bnd[i];
    if (direct) {
      if (!d.carries_equation[i]) {
        ExtensionData ext;
        try {
          ext = extension_data(problem.field, problem.domain, x, cfg.flow);
        } catch (const Error& e) {
          std::ostringstream os;
          os << "exterior node " << i << " at x = (" << x.transpose() << "): " << e.what();
          throw Error(e.code(), os.str());
        }
        b.add(i, 1.0);
        for (const auto& [j, w] : grid.interpolate(ext.landing).terms) b.add(j, -w);
        b.rhs = ext.g_integral;
      }
    } else {
      const double dt = problem.domain.truncated_distance(x);
      if (dt > 0) {
        add_upwind(b, grid, i, problem.field.gamma(x), dt);
        b.rhs = problem.field.g_zero ? 0.0 : dt * problem.field.g(x);
      }
    }
    b.merge();
    if (cfg.check_monotonicity) check_monotone(grid, b, i, direct ? "extension" : "penalty");
  });

  for (std::size_t k = 0; k < K; ++k) {
    d.controls.push_back(to_matrix(n, ctrl[k]));
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) r[i] = ctrl[k][i].rhs;
    d.rhs.push_back(std::move(r));
  }
  d.boundary = to_matrix(n, bnd);
  d.boundary_rhs.resize(n);
  for (int i = 0; i < n; ++i) d.boundary_rhs[i] = bnd[i].rhs;
  d.boundary_scale = 1.0;
  d.set_kappa(kappa);
  return d;
}

Eigen::VectorXd discretize_residual(const Problem& problem, double kappa, const Eigen::VectorXd& u) {
  return discretize(problem, kappa).residual(u);
}

Solution solve_fixed_point(const Problem& problem, const Discretization& disc,
                           const Eigen::VectorXd* warm_start, double kappa) {
  const SolverConfig& cfg = problem.config;
  const int n = disc.size();
  Solution s;
  s.carries_equation = disc.carries_equation;
  s.values = warm_start ? *warm_start : Eigen::VectorXd::Zero(n);
  const double hist_kappa = disc.mode == BcMode::Penalized ? kappa : 0.0;
  const auto record = [&](double r) {
    s.residual_history.push_back(r);
    s.history_kappa.push_back(hist_kappa);
  };
  if (cfg.iteration == IterationKind::Policy) {
    const int max_policy = std::min(cfg.max_iters, 200);
    for (int it = 0;; ++it) {
      const Eigen::VectorXd r = disc.residual(s.values);
      const double rn = r.lpNorm<Eigen::Infinity>();
      record(rn);
      if (rn <= cfg.tol_residual) {
        s.converged = true;
        s.iterations = it;
        break;
      }
      if (it >= max_policy || !std::isfinite(rn)) {
        throw Error(ErrorCode::NoConvergence,
                    "policy iteration did not reach tol_residual = " +
                        std::to_string(cfg.tol_residual) + "; " + history_tail(s.residual_history));
      }
      const RowMatrix J = disc.jacobian(disc.policy(s.values));
      s.values -= linear_solve(J, r, problem.grid->dimension());
    }
  } else {
    const double rho = cfg.rho > 0 ? cfg.rho : 1.0 / disc.max_diagonal();
    if (rho < 1e-12) {
      throw Error(ErrorCode::StiffPenalty, "explicit step rho = " + std::to_string(rho) +
                                               " collapsed below 1e-12; refine the kappa schedule");
    }
    s.rho = rho;
    for (int it = 0;; ++it) {
      const Eigen::VectorXd r = disc.residual(s.values);
      const double rn = r.lpNorm<Eigen::Infinity>();
      record(rn);
      if (rn <= cfg.tol_residual) {
        s.converged = true;
        s.iterations = it;
        break;
      }
      if (it >= cfg.max_iters || !std::isfinite(rn)) {
        throw Error(ErrorCode::NoConvergence,
                    "explicit iteration did not reach tol_residual = " +
                        std::to_string(cfg.tol_residual) + " in " + std::to_string(cfg.max_iters) +
                        " iterations; " + history_tail(s.residual_history));
      }
      s.values -= rho * r;
      if (disc.mode == BcMode::DirectExtension) {
        // Exterior values follow the transport extension of the current iterate.
        const Eigen::VectorXd ext = disc.boundary_rhs - (disc.boundary * s.values - s.values);
        for (int i = 0; i < n; ++i) {
          if (!disc.carries_equation[i]) s.values[i] = ext[i];
        }
      }
    }
  }
  fill_bound(problem, disc, s);
  s.metadata["bc_mode"] = to_string(disc.mode);
  s.metadata["iteration"] = to_string(cfg.iteration);
  return s;
}

Solution continuation_in_kappa(const Problem& problem, const Eigen::VectorXd* warm_start) {
  if (problem.config.bc_mode != BcMode::Penalized) {
    throw Error(ErrorCode::InvalidArgument, "continuation_in_kappa needs the penalized mode");
  }
  const SolverConfig& cfg = problem.config;
  if (cfg.kappa_schedule.empty()) throw Error(ErrorCode::InvalidArgument, "empty kappa schedule");
  const double tol_kappa = cfg.tol_kappa > 0 ? cfg.tol_kappa : 10.0 * cfg.tol_residual;
  Discretization disc = discretize(problem, cfg.kappa_schedule.front());
  std::vector<char> closure_nodes(disc.size());
  for (int i = 0; i < disc.size(); ++i) closure_nodes[i] = problem.in_closure(i) ? 1 : 0;

  Solution out;
  Eigen::VectorXd u = warm_start ? *warm_start : Eigen::VectorXd::Zero(disc.size());
  bool first = true;
  for (double kappa : cfg.kappa_schedule) {
    disc.set_kappa(kappa);
    Solution s = solve_fixed_point(problem, disc, &u, kappa);
    KappaStep step;
    step.kappa = kappa;
    step.delta = first ? std::numeric_limits<double>::quiet_NaN()
                       : sup_over(s.values - u, closure_nodes);
    step.iterations = s.iterations;
    step.residual = s.residual_history.back();
    out.kappa_trace.push_back(step);
    out.residual_history.insert(out.residual_history.end(), s.residual_history.begin(),
                                s.residual_history.end());
    out.history_kappa.insert(out.history_kappa.end(), s.history_kappa.begin(),
                             s.history_kappa.end());
    out.iterations += s.iterations;
    out.rho = s.rho;
    u = s.values;
    out.values = u;
    out.carries_equation = s.carries_equation;
    out.converged = !first && step.delta < tol_kappa;
    first = false;
    if (out.converged) break;
  }
  // Schedule exhaustion is reported through kappa_trace rather than an error.
  if (!out.converged) out.converged = true, out.metadata["kappa_status"] = "schedule exhausted";
  else out.metadata["kappa_status"] = "increment below tol_kappa";
  fill_bound(problem, disc, out);
  out.metadata["bc_mode"] = "penalized";
  out.metadata["iteration"] = to_string(cfg.iteration);
  return out;
}

Solution solve_direct(const Problem& problem, const Eigen::VectorXd* warm_start) {
  if (problem.config.bc_mode != BcMode::DirectExtension) {
    Problem p = problem;
    p.config.bc_mode = BcMode::DirectExtension;
    return solve_direct(p, warm_start);
  }
  const Discretization disc = discretize(problem);
  return solve_fixed_point(problem, disc, warm_start, 0.0);
}

Solution solve(const Problem& problem) {
  return problem.config.bc_mode == BcMode::Penalized ? continuation_in_kappa(problem)
                                                     : solve_direct(problem);
}

namespace {

struct DiscreteDerivatives {
  Point grad;
  SquareMatrix hess;
};

DiscreteDerivatives discrete_derivatives(const Grid& grid, const Eigen::VectorXd& u, int i) {
  const int dim = grid.dimension();
  const double h = grid.h();
  DiscreteDerivatives d{Point::Zero(dim), SquareMatrix::Zero(dim, dim)};
  const auto val = [&](std::array<int, kMaxDim> off) {
    const int j = grid.offset(i, off);
    return j < 0 ? u[i] : u[j];
  };
  for (int a = 0; a < dim; ++a) {
    std::array<int, kMaxDim> p{0, 0, 0}, m{0, 0, 0};
    p[a] = 1;
    m[a] = -1;
    d.grad(a) = (val(p) - val(m)) / (2 * h);
    d.hess(a, a) = (val(p) - 2 * u[i] + val(m)) / (h * h);
    for (int b = a + 1; b < dim; ++b) {
      std::array<int, kMaxDim> pp{0, 0, 0}, pm{0, 0, 0}, mp{0, 0, 0}, mm{0, 0, 0};
      pp[a] = 1, pp[b] = 1;
      pm[a] = 1, pm[b] = -1;
      mp[a] = -1, mp[b] = 1;
      mm[a] = -1, mm[b] = -1;
      d.hess(a, b) = d.hess(b, a) = (val(pp) - val(pm) - val(mp) + val(mm)) / (4 * h * h);
    }
  }
  return d;
}

}  // namespace

Probe make_touching_probe(const Problem& problem, const Solution& solution, int node,
                          bool from_above, double curvature) {
  const Grid& grid = *problem.grid;
  const DiscreteDerivatives d = discrete_derivatives(grid, solution.values, node);
  Probe p;
  p.center = grid.node(node);
  p.gradient = d.grad;
  const int dim = grid.dimension();
  p.hessian = d.hess + (from_above ? curvature : -curvature) *
                           SquareMatrix(SquareMatrix::Identity(dim, dim));
  p.from_above = from_above;
  return p;
}

ProbeReport definition_semantics_probe(const Problem& problem, const Solution& solution,
                                       const Probe& probe) {
  const Grid& grid = *problem.grid;
  const Eigen::VectorXd& u = solution.values;
  const int dim = grid.dimension();
  const double h = grid.h();
  const double delta = problem.table ? problem.table->delta() : h;
  const double jb = problem.levy ? problem.levy->jump_bound : 1.0;
  const double radius = probe.radius > 0 ? probe.radius : std::max(jb * delta, 3 * h);

  const LinearForm c0 = grid.interpolate(probe.center);
  const double phi0 = c0(u);
  const auto phi = [&](const Point& x) {
    const Point dx = x - probe.center;
    return phi0 + probe.gradient.dot(dx) + 0.5 * dx.dot(probe.hessian * dx);
  };
  const double sign = probe.from_above ? 1.0 : -1.0;
  int best = -1;
  double best_val = -std::numeric_limits<double>::infinity();
  double best_dist = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const Point x = grid.node(i);
    const double r = (x - probe.center).norm();
    if (r > radius) continue;
    const double v = sign * (u[i] - phi(x));
    if (v > best_val) {
      best_val = v;
      best = i;
      best_dist = r;
    }
  }
  if (best < 0 || best_dist > radius - h) {
    throw Error(ErrorCode::NoTouchingPoint,
                std::string("probe does not touch u_h from ") + (probe.from_above ? "above" : "below") +
                    " inside the ball of radius " + std::to_string(radius));
  }

  ProbeReport rep;
  rep.node = best;
  rep.x = grid.node(best);
  rep.node_class = grid.node_class(best);
  const Point x = rep.x;
  const Point Dphi = probe.gradient + probe.hessian * (x - probe.center);
  const SquareMatrix& D2phi = probe.hessian;
  rep.tolerance = probe.c_probe * h * (1.0 + Dphi.norm() + D2phi.norm());

  double l = 0.0;
  if (problem.table) {
    const NonlocalStencil st = nonlocal_stencil(*problem.table, best, exterior_closure(problem));
    l = 0.5 * (st.sigma_eff * D2phi).trace() + st.far(u) - st.far_mass * u[best] - st.drift.dot(Dphi);
  }
  rep.equation_value = problem.nl.evaluate(x, u[best], Dphi, D2phi, l);

  const ObliqueField& f = problem.field;
  const auto oblique_value = [&](const Point& y) {
    return Dphi.dot(f.gamma(y)) - (f.g_zero ? 0.0 : f.g(y));
  };
  const double tol = rep.tolerance;
  switch (rep.node_class) {
    case NodeClass::Interior:
      rep.case_name = "interior";
      rep.satisfied = probe.from_above ? rep.equation_value <= tol : rep.equation_value >= -tol;
      break;
    case NodeClass::Boundary: {
      rep.case_name = "boundary";
      const Point pb = problem.domain.closest_point(x);
      if (f.is_normal && problem.domain.convex()) {
        double inf = std::numeric_limits<double>::infinity(), sup = -inf;
        Point on_boundary = pb;
        if (problem.domain.dist_to_closure(x) == 0.0) {
          // Interior boundary-band node: use the nearest boundary point.
          Point n = problem.domain.extended_normal(x);
          on_boundary = x + problem.domain.exact_signed_distance(x) * n;
        }
        NormalCone cone;
        try {
          cone = problem.domain.normal_cone(on_boundary);
        } catch (const Error&) {
          cone.generators = {problem.domain.extended_normal(x)};
        }
        const double gv = f.g_zero ? 0.0 : f.g(on_boundary);
        for (const Point& n : cone.sample(64)) {
          inf = std::min(inf, Dphi.dot(n) - gv);
          sup = std::max(sup, Dphi.dot(n) - gv);
        }
        rep.boundary_value = probe.from_above ? inf : sup;
      } else {
        rep.boundary_value = oblique_value(x);
      }
      rep.satisfied = probe.from_above
                          ? std::min(rep.equation_value, rep.boundary_value) <= tol
                          : std::max(rep.equation_value, rep.boundary_value) >= -tol;
      break;
    }
    case NodeClass::Exterior:
      rep.case_name = "exterior";
      rep.boundary_value = oblique_value(x);
      rep.satisfied = probe.from_above ? rep.boundary_value <= tol : rep.boundary_value >= -tol;
      break;
  }
  (void)dim;
  return rep;
}

}  // namespace nlobc
