#include "nlobc/nonlinearity.hpp"

#include "nlobc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace nlobc {

LinearRecord complete_record(LinearRecord r, int dim, double lambda0) {
  if (!r.A) r.A = [dim](const Point&) { return SquareMatrix(SquareMatrix::Zero(dim, dim)); };
  if (!r.b) r.b = [dim](const Point&) { return Point(Point::Zero(dim)); };
  if (!r.lambda) r.lambda = constant_field(lambda0);
  if (!r.f) r.f = constant_field(0.0);
  return r;
}

Nonlinearity Nonlinearity::linear(LinearRecord record, double lambda0) {
  return bellman({std::move(record)}, lambda0);
}

Nonlinearity Nonlinearity::bellman(std::vector<LinearRecord> records, double lambda0) {
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "nonlinearity needs a record");
  if (!(lambda0 > 0)) throw Error(ErrorCode::InvalidArgument, "lambda0 must be > 0");
  Nonlinearity nl;
  nl.lambda0_ = lambda0;
  for (auto& r : records) {
    if (!r.lambda) r.lambda = constant_field(lambda0);
    if (!r.f) r.f = constant_field(0.0);
  }
  nl.records_ = std::move(records);
  return nl;
}

double Nonlinearity::evaluate_record(std::size_t k, const Point& x, double u, const Point& p,
                                     const SquareMatrix& X, double l) const {
  const LinearRecord& r = records_.at(k);
  double v = -r.a * l + r.lambda(x) * u - r.f(x);
  if (r.A) v -= (r.A(x) * X).trace();
  if (r.b) v -= r.b(x).dot(p);
  return v;
}

double Nonlinearity::evaluate(const Point& x, double u, const Point& p, const SquareMatrix& X,
                              double l) const {
  double v = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < records_.size(); ++k) {
    v = std::max(v, evaluate_record(k, x, u, p, X, l));
  }
  return v;
}

double compute_MF(const Nonlinearity& nl, const Grid& grid, bool all_nodes) {
  const int dim = grid.dimension();
  const Point p0 = Point::Zero(dim);
  const SquareMatrix X0 = SquareMatrix::Zero(dim, dim);
  double m = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    if (!all_nodes && grid.exact_signed_distance(i) < 0) continue;
    m = std::max(m, std::abs(nl.evaluate(grid.node(i), 0.0, p0, X0, 0.0)));
  }
  return m;
}

bool AssumptionReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const AssumptionCheck* AssumptionReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

AssumptionReport verify_assumptions(const Nonlinearity& nl, const std::vector<Point>& points,
                                    int samples, std::uint64_t seed) {
  AssumptionReport rep;
  if (points.empty()) return rep;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int dim = static_cast<int>(points.front().size());
  double a_max = 0.0;
  for (const auto& r : nl.records()) a_max = std::max(a_max, std::abs(r.a));

  AssumptionCheck proper{"A2", true, std::numeric_limits<double>::infinity(), ""};
  AssumptionCheck ell_x{"ellipticity_X", true, std::numeric_limits<double>::infinity(), ""};
  AssumptionCheck ell_l{"ellipticity_l", true, std::numeric_limits<double>::infinity(), ""};
  AssumptionCheck lip_l{"A4", true, std::numeric_limits<double>::infinity(), ""};
  const double tol = 1e-10;
  for (int s = 0; s < samples; ++s) {
    const Point& x = points[static_cast<std::size_t>(s) % points.size()];
    Point p(dim);
    SquareMatrix X(dim, dim), B(dim, dim);
    for (int a = 0; a < dim; ++a) {
      p(a) = gauss(rng);
      for (int b = 0; b < dim; ++b) {
        X(a, b) = gauss(rng);
        B(a, b) = gauss(rng);
      }
    }
    X = 0.5 * (X + X.transpose()).eval();
    const SquareMatrix P = B * B.transpose();
    const double u = gauss(rng), l = gauss(rng);
    const double du = 0.1 + unif(rng), dl = 0.1 + unif(rng);
    const double f0 = nl.evaluate(x, u, p, X, l);

    const double slope = (nl.evaluate(x, u + du, p, X, l) - f0) / du;
    proper.worst_margin = std::min(proper.worst_margin, slope - nl.lambda0());
    ell_x.worst_margin = std::min(ell_x.worst_margin, f0 - nl.evaluate(x, u, p, X + P, l));
    const double fl = nl.evaluate(x, u, p, X, l + dl);
    ell_l.worst_margin = std::min(ell_l.worst_margin, f0 - fl);
    lip_l.worst_margin = std::min(lip_l.worst_margin, a_max - std::abs(fl - f0) / dl);
  }
  const auto finish = [&](AssumptionCheck& c, const std::string& what) {
    c.pass = c.worst_margin >= -tol;
    c.detail = what + (c.pass ? " holds" : " violated") + " on " + std::to_string(samples) +
               " samples (worst margin " + std::to_string(c.worst_margin) + ")";
    rep.checks.push_back(c);
  };
  finish(proper, "F(u) - F(v) >= lambda0 (u - v)");
  finish(ell_x, "F nonincreasing in X (PSD order)");
  finish(ell_l, "F nonincreasing in l");
  finish(lip_l, "F Lipschitz in l with constant |a|");
  return rep;
}

}  // namespace nlobc
