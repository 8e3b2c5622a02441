#pragma once

#include "nlobc/flow.hpp"
#include "nlobc/geometry.hpp"
#include "nlobc/grid.hpp"
#include "nlobc/types.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nlobc {

/// c_alpha |z|^{-N-alpha}. c_alpha <= 0 selects the constant for which the
/// operator is -(-Laplacian)^{alpha/2}.
struct FractionalLaplacian {
  double alpha = 1.0;
  double c_alpha = 0.0;
};

/// Finite measure with density `density` on R^N, supported in |z| <= support_radius.
struct CompoundPoisson {
  ScalarField density;
  double support_radius = 1.0;
  /// Radii where the density is discontinuous; used as quadrature breakpoints.
  std::vector<double> breakpoints;
};

/// c_alpha e^{-rate |z|} |z|^{-N-alpha}; c_alpha <= 0 as for FractionalLaplacian.
struct TemperedStable {
  double alpha = 1.0;
  double rate = 1.0;
  double c_alpha = 0.0;
};

struct IdentityJump {};

/// j(x, z) = sigma(x) z with |sigma(x)| <= bound.
struct AffineStateJump {
  MatrixField sigma;
  double bound = 1.0;
};

using Measure = std::variant<FractionalLaplacian, CompoundPoisson, TemperedStable>;
using JumpMap = std::variant<IdentityJump, AffineStateJump>;

/// Standard normalization of the fractional Laplacian in dimension n.
double fractional_constant(int dim, double alpha);

struct LevyModel {
  Measure measure = FractionalLaplacian{};
  JumpMap jump_map = IdentityJump{};
  int dimension = 1;
  /// Small-jump cutoff; <= 0 selects max(h, 0.1 sqrt(h)) on the grid.
  double delta = 0.0;
  double trunc_radius = 50.0;
  /// Cells per dyadic shell per side in 1-D; radial cells per shell are
  /// radial_nodes / 2 in 2-D and radial_nodes / 4 in 3-D.
  int radial_nodes = 16;
  /// Angular cells per shell in 2-D; 3-D uses angular_nodes / 2 azimuthal
  /// times angular_nodes / 4 polar cells.
  int angular_nodes = 32;
  /// Fold the mass beyond trunc_radius in as tail * (u_far - u(x)).
  bool fold_tail = false;
  /// DeltaTooLarge fires when delta > safety * h.
  double delta_safety = 64.0;
  /// Declared c(j): |j(x, z)| <= c(j) |z|.
  double jump_bound = 1.0;

  std::string measure_name() const;
  /// Effective c_alpha (0 for compound Poisson).
  double c_alpha() const;
  /// Density of mu at z (before the jump map).
  double density(const Point& z) const;
  /// True when the density is a function of |z| only.
  bool radial() const;
  Point jump(const Point& x, const Point& z) const;
};

/// mu-mass, barycenter and mass-weighted covariance of a quadrature cell of mu.
struct JumpCell {
  double mass = 0.0;
  Point barycenter;
  SquareMatrix covariance;
  double r_lo = 0.0;
  double r_hi = 0.0;
  /// Angular extent (2-D: theta; 3-D: theta then phi).
  double a_lo = 0.0, a_hi = 0.0, b_lo = 0.0, b_hi = 0.0;
  /// 1-D cells: sign of z.
  int side = 1;
  /// 2 dim equally weighted offsets matching mass, barycenter and covariance.
  std::vector<Point> split;
};

/// Far-jump landing of a node with its weight.
struct FarNode {
  Point landing;
  double weight = 0.0;
};

/// Split quadrature of the Levy operator at level delta: exact small-jump
/// second moment, far-jump cells with nonnegative mu-masses, compensator drift
/// and the tail mass beyond trunc_radius.
class QuadratureTable {
 public:
  const LevyModel& model() const { return model_; }
  double delta() const { return delta_; }
  double tail_mass() const { return tail_mass_; }
  /// Total far mass on delta <= |z| < trunc_radius.
  double far_mass() const { return far_mass_; }
  const std::vector<JumpCell>& cells() const { return cells_; }
  const Grid* grid() const { return grid_; }
  /// Cells with |z| below this radius get the second-moment corrections
  /// (cell covariance, interpolation error) evaluated at the node itself.
  double correction_radius() const { return correction_radius_; }

  /// Sigma_delta(x) = int_{|z|<delta} j j^T dmu.
  SquareMatrix small_jump_second_moment(const Point& x) const;
  /// int_{delta<=|z|<1} j(x, z) dmu.
  Point compensator_drift(const Point& x) const;
  std::vector<FarNode> far_nodes(const Point& x) const;

  /// Measure-level moments, before the jump map.
  const SquareMatrix& sigma_delta() const { return sigma_delta_; }
  const Point& drift() const { return drift_; }

 private:
  friend QuadratureTable build_quadrature(const LevyModel&, const Grid&, const Domain&);
  friend QuadratureTable build_quadrature(const LevyModel&, int, double);
  LevyModel model_;
  const Grid* grid_ = nullptr;
  double delta_ = 0.0;
  double tail_mass_ = 0.0;
  double far_mass_ = 0.0;
  double correction_radius_ = 0.0;
  SquareMatrix sigma_delta_;
  Point drift_;
  std::vector<JumpCell> cells_;
};

/// Builds the table for `grid`. The grid must outlive the table.
QuadratureTable build_quadrature(const LevyModel& model, const Grid& grid, const Domain& domain);
/// Grid-free table (delta must be set); used by the Monte Carlo oracle.
QuadratureTable build_quadrature(const LevyModel& model, int dim, double delta);

/// Discrete nonlocal operator at node i as an affine form of the grid values.
/// Pieces are kept apart so the solver can merge the second-order part with
/// the local diffusion into one monotone stencil.
struct NonlocalStencil {
  /// sum_k w_k u*(x + j_k) + tail u_far (affine in u).
  LinearForm far;
  /// Coefficient of -u(x_i) (sum of far weights, plus the tail when folded).
  double far_mass = 0.0;
  /// Second-order coefficient: Sigma_delta plus the moment corrections of the
  /// cells inside the correction radius (exact for quadratics on those cells).
  SquareMatrix sigma_eff;
  /// Compensator drift: the stencil subtracts drift . Du.
  Point drift;
};

NonlocalStencil nonlocal_stencil(const QuadratureTable& table, int node,
                                 const ExteriorClosure& closure);

/// 1/2 Tr(Sigma_eff D2 u) + far(u) - far_mass u_i - drift . D u at node i with
/// central differences.
double apply_nonlocal(const QuadratureTable& table, const Eigen::VectorXd& u,
                      const ExteriorClosure& closure, int node);

struct IntegrabilityReport {
  bool ok = true;
  /// int_{|z| >= delta} |j| dmu (infinite when divergent).
  double first_moment = 0.0;
  /// int (|z|^2 ^ 1) dmu.
  double levy_moment = 0.0;
  std::string message;
};

/// First-moment check required when g is not compactly supported.
IntegrabilityReport check_exterior_integrability(const LevyModel& model, const ObliqueField& field,
                                                 const Domain& domain);

}  // namespace nlobc
