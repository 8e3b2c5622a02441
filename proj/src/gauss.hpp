#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <array>
#include <cstddef>

namespace nlobc::detail {

// Full Gauss-Legendre rule on [-1, 1] (boost stores only the nonnegative half).
template <std::size_t N>
struct GaussRule {
  std::array<double, N> x{};
  std::array<double, N> w{};

  GaussRule() {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& a = G::abscissa();
    const auto& wt = G::weights();
    std::size_t k = 0;
    for (std::size_t i = a.size(); i-- > 0;) {
      if (a[i] == 0.0) continue;
      x[k] = -a[i];
      w[k++] = wt[i];
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      x[k] = a[i];
      w[k++] = wt[i];
    }
  }

  // Nodes and weights mapped to [lo, hi].
  template <class F>
  double integrate(double lo, double hi, F&& f) const {
    const double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += w[i] * f(c + r * x[i]);
    return r * s;
  }
};

template <std::size_t N>
const GaussRule<N>& gauss_rule() {
  static const GaussRule<N> rule;
  return rule;
}

}  // namespace nlobc::detail
