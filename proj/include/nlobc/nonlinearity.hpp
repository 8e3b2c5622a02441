#pragma once

#include "nlobc/grid.hpp"
#include "nlobc/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nlobc {

/// -a l - Tr(A(x) X) - b(x) . p + lambda(x) u - f(x), with l = I[u](x).
/// The fractional term enters with a minus sign: a (-Laplacian)^{alpha/2} u = -a I[u].
struct LinearRecord {
  double a = 0.0;
  MatrixField A;
  VectorField b;
  ScalarField lambda;
  ScalarField f;
  /// Expression texts for run metadata (optional).
  std::string description;
};

/// F(x, u, p, X, l): a single linear record or the pointwise maximum of
/// several (finite-control Bellman operator).
class Nonlinearity {
 public:
  static Nonlinearity linear(LinearRecord record, double lambda0);
  static Nonlinearity bellman(std::vector<LinearRecord> records, double lambda0);

  bool is_linear() const { return records_.size() == 1; }
  const std::vector<LinearRecord>& records() const { return records_; }
  double lambda0() const { return lambda0_; }

  double evaluate(const Point& x, double u, const Point& p, const SquareMatrix& X, double l) const;
  double evaluate_record(std::size_t k, const Point& x, double u, const Point& p,
                         const SquareMatrix& X, double l) const;

 private:
  std::vector<LinearRecord> records_;
  double lambda0_ = 1.0;
};

/// Missing coefficient fields default to zero (A, b, f) or lambda0 (lambda).
LinearRecord complete_record(LinearRecord r, int dim, double lambda0);

/// sup |F(x, 0, 0, 0, 0)| over the grid nodes in the closure of the domain
/// (all nodes when all_nodes is set).
double compute_MF(const Nonlinearity& nl, const Grid& grid, bool all_nodes = false);

struct AssumptionCheck {
  std::string name;
  bool pass = true;
  double worst_margin = 0.0;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool all_pass() const;
  const AssumptionCheck* find(const std::string& name) const;
};

/// Randomized check of properness (A2), degenerate ellipticity in X and l,
/// and the Lipschitz bound in l (A4) at the given points.
AssumptionReport verify_assumptions(const Nonlinearity& nl, const std::vector<Point>& points,
                                    int samples = 100, std::uint64_t seed = 7);

}  // namespace nlobc
