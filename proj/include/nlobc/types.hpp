#pragma once

#include <Eigen/Dense>

#include <functional>

namespace nlobc {

/// Largest spatial dimension supported by the library.
inline constexpr int kMaxDim = 3;

/// Point or vector in R^N, N <= kMaxDim. Stack allocated.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/// Symmetric (or general) N x N matrix, N <= kMaxDim.
using SquareMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<Point(const Point&)>;
using MatrixField = std::function<SquareMatrix(const Point&)>;

inline Point make_point(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p(i++) = x;
  return p;
}

inline ScalarField constant_field(double c) {
  return [c](const Point&) { return c; };
}

}  // namespace nlobc
