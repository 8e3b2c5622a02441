#include "nlobc/grid.hpp"

#include "nlobc/error.hpp"

#include <algorithm>
#include <cmath>

namespace nlobc {

const char* to_string(NodeClass c) {
  switch (c) {
    case NodeClass::Interior: return "interior";
    case NodeClass::Boundary: return "boundary";
    case NodeClass::Exterior: return "exterior";
  }
  return "?";
}

Grid Grid::build(const Domain& domain, const GridOptions& opts) {
  if (!(opts.h > 0)) throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive");
  if (opts.margin < 0) throw Error(ErrorCode::InvalidArgument, "grid margin must be >= 0");
  Grid g;
  g.domain_ = domain;
  g.opts_ = opts;
  g.dim_ = domain.dimension();
  g.h_ = opts.h;
  const int dim = g.dim_;
  const double h = opts.h;
  Point lo(dim), hi(dim);
  if (opts.lo && opts.hi) {
    if (opts.lo->size() != dim || opts.hi->size() != dim) {
      throw Error(ErrorCode::InvalidArgument, "grid box dimension does not match the domain");
    }
    lo = *opts.lo;
    hi = *opts.hi;
  } else {
    if (!domain.bounded()) {
      throw Error(ErrorCode::InvalidArgument, "unbounded domains need an explicit grid box");
    }
    auto [dlo, dhi] = domain.bounding_box();
    const double m = std::ceil(opts.margin / h - 1e-9) * h;
    lo = dlo.array() - m;
    hi = dhi.array() + m;
  }
  g.box_lo_ = lo;
  g.box_hi_ = hi;
  const bool centered = opts.alignment == Alignment::CellCentered;
  g.size_ = 1;
  for (int a = 0; a < dim; ++a) {
    const int cells = std::max(1, static_cast<int>(std::ceil((hi(a) - lo(a)) / h - 1e-9)));
    g.box_hi_(a) = lo(a) + cells * h;
    g.n_[a] = centered ? cells : cells + 1;
    g.stride_[a] = g.size_;
    g.size_ *= g.n_[a];
  }
  g.node_lo_ = centered ? Point(lo.array() + 0.5 * h) : lo;
  g.cls_.resize(g.size_);
  g.sd_.resize(g.size_);
  for (int i = 0; i < g.size_; ++i) {
    const double sd = domain.exact_signed_distance(g.node(i));
    g.sd_[i] = sd;
    if (sd > 0.5 * h) g.cls_[i] = NodeClass::Interior;
    else if (sd >= -0.5 * h) g.cls_[i] = NodeClass::Boundary;
    else g.cls_[i] = NodeClass::Exterior;
  }
  return g;
}

Point Grid::node_hi() const {
  Point p = node_lo_;
  for (int a = 0; a < dim_; ++a) p(a) += (n_[a] - 1) * h_;
  return p;
}

Point Grid::node(int i) const {
  Point p(dim_);
  for (int a = 0; a < dim_; ++a) {
    p(a) = node_lo_(a) + ((i / stride_[a]) % n_[a]) * h_;
  }
  return p;
}

std::array<int, kMaxDim> Grid::multi_index(int i) const {
  std::array<int, kMaxDim> k{0, 0, 0};
  for (int a = 0; a < dim_; ++a) k[a] = (i / stride_[a]) % n_[a];
  return k;
}

int Grid::index(const std::array<int, kMaxDim>& k) const {
  int i = 0;
  for (int a = 0; a < dim_; ++a) i += k[a] * stride_[a];
  return i;
}

int Grid::neighbor(int i, int axis, int step) const {
  const int k = (i / stride_[axis]) % n_[axis] + step;
  if (k < 0 || k >= n_[axis]) return -1;
  return i + step * stride_[axis];
}

int Grid::offset(int i, const std::array<int, kMaxDim>& off) const {
  int j = i;
  for (int a = 0; a < dim_; ++a) {
    if (off[a] == 0) continue;
    const int k = (i / stride_[a]) % n_[a] + off[a];
    if (k < 0 || k >= n_[a]) return -1;
    j += off[a] * stride_[a];
  }
  return j;
}

bool Grid::contains(const Point& x) const {
  const double eps = 1e-12 * h_;
  for (int a = 0; a < dim_; ++a) {
    const double t = x(a) - node_lo_(a);
    if (t < -eps || t > (n_[a] - 1) * h_ + eps) return false;
  }
  return true;
}

LinearForm Grid::interpolate(const Point& x) const {
  std::array<int, kMaxDim> base{0, 0, 0};
  std::array<double, kMaxDim> frac{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    const double t = std::clamp((x(a) - node_lo_(a)) / h_, 0.0, static_cast<double>(n_[a] - 1));
    int k = std::min(static_cast<int>(std::floor(t)), std::max(n_[a] - 2, 0));
    base[a] = k;
    frac[a] = n_[a] > 1 ? t - k : 0.0;
  }
  LinearForm out;
  const int corners = 1 << dim_;
  out.terms.reserve(corners);
  const int b0 = index(base);
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    int j = b0;
    for (int a = 0; a < dim_; ++a) {
      const bool up = (c >> a) & 1;
      w *= up ? frac[a] : 1.0 - frac[a];
      if (up) j += stride_[a];
    }
    if (w != 0.0) out.terms.emplace_back(j, w);
  }
  return out;
}

double Grid::interpolate_value(const Eigen::VectorXd& u, const Point& x) const {
  return interpolate(x)(u);
}

Eigen::VectorXd Grid::sample(const ScalarField& f) const {
  Eigen::VectorXd v(size_);
  for (int i = 0; i < size_; ++i) v[i] = f(node(i));
  return v;
}

}  // namespace nlobc
