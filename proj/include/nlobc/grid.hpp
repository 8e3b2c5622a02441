#pragma once

#include "nlobc/geometry.hpp"
#include "nlobc/types.hpp"

#include <Eigen/Core>

#include <array>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace nlobc {

/// Affine functional c + sum_j w_j u_j of a grid function.
struct LinearForm {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  double operator()(const Eigen::VectorXd& u) const {
    double s = constant;
    for (const auto& [j, w] : terms) s += w * u[j];
    return s;
  }
};

/// Value of u at a point the grid cannot represent (a jump landing outside the box).
using ExteriorClosure = std::function<LinearForm(const Point&)>;

enum class NodeClass { Interior, Boundary, Exterior };

const char* to_string(NodeClass c);

enum class Alignment {
  /// Nodes at lo + (k + 1/2) h: flat boundaries fall midway between nodes.
  CellCentered,
  /// Nodes at lo + k h.
  Vertex,
};

struct GridOptions {
  double h = 0.05;
  /// Exterior margin around the bounding box of the domain.
  double margin = 1.0;
  Alignment alignment = Alignment::CellCentered;
  /// Explicit box; overrides the domain bounding box plus margin.
  std::optional<Point> lo;
  std::optional<Point> hi;
};

/// Uniform tensor grid on a box containing the closure of the domain.
class Grid {
 public:
  static Grid build(const Domain& domain, const GridOptions& opts);

  int dimension() const { return dim_; }
  int size() const { return size_; }
  double h() const { return h_; }
  const std::array<int, kMaxDim>& shape() const { return n_; }
  /// Box covered by the grid cells (nodes lie strictly inside for CellCentered).
  const Point& box_lo() const { return box_lo_; }
  const Point& box_hi() const { return box_hi_; }
  /// First and last node.
  const Point& node_lo() const { return node_lo_; }
  Point node_hi() const;
  const GridOptions& options() const { return opts_; }
  const Domain& domain() const { return domain_; }

  Point node(int i) const;
  std::array<int, kMaxDim> multi_index(int i) const;
  int index(const std::array<int, kMaxDim>& k) const;
  /// Neighbor index along `axis` at offset `step`, or -1 outside the grid.
  int neighbor(int i, int axis, int step) const;
  /// Neighbor at a general integer offset, or -1 outside the grid.
  int offset(int i, const std::array<int, kMaxDim>& off) const;

  NodeClass node_class(int i) const { return cls_[i]; }
  double exact_signed_distance(int i) const { return sd_[i]; }
  double dist_to_closure(int i) const { return std::max(0.0, -sd_[i]); }

  /// Within the convex hull of the nodes (where multilinear interpolation is defined).
  bool contains(const Point& x) const;
  /// Multilinear interpolation weights at x, clamped to the node hull.
  LinearForm interpolate(const Point& x) const;
  /// Value of interpolate(x) on a grid function.
  double interpolate_value(const Eigen::VectorXd& u, const Point& x) const;

  /// Samples a field at every node.
  Eigen::VectorXd sample(const ScalarField& f) const;

 private:
  Domain domain_ = Domain::interval(0, 1);
  GridOptions opts_;
  int dim_ = 1;
  int size_ = 0;
  double h_ = 0.0;
  std::array<int, kMaxDim> n_{1, 1, 1};
  std::array<int, kMaxDim> stride_{1, 1, 1};
  Point box_lo_, box_hi_, node_lo_;
  std::vector<NodeClass> cls_;
  std::vector<double> sd_;
};

}  // namespace nlobc
