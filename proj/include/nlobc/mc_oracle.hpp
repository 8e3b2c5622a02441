#pragma once

#include "nlobc/flow.hpp"
#include "nlobc/geometry.hpp"
#include "nlobc/levy.hpp"
#include "nlobc/nonlinearity.hpp"

#include <cstdint>
#include <optional>

namespace nlobc {

struct JumpProcessConfig {
  /// Euler step near the boundary and cap for coefficient freezing.
  double time_step = 0.01;
  /// Largest step away from the boundary; steps grow with the distance.
  double max_step = 0.1;
  /// <= 0 selects the smallest horizon with exp(-lambda0 T) < 0.01 target_accuracy.
  double horizon = 0.0;
  double target_accuracy = 1e-3;
  long n_paths = 10000;
  std::uint64_t rng_seed = 1;
  /// Small-jump cutoff; <= 0 takes the model's delta. Jumps below it are
  /// folded into the Brownian part with covariance Sigma_delta.
  double delta = 0.0;
  /// Flow used to relocate exterior states (same defaults as the solver).
  FlowOptions flow = [] {
    FlowOptions f;
    f.distance_ratio = 0.25;
    f.start_fraction = 0.5;
    f.hermite_events = true;
    return f;
  }();
  /// Add the boundary pushing a Brownian bridge would see between Euler
  /// endpoints (half-space approximation); removes the O(sqrt(dt)) flux bias
  /// of discretely monitored reflection.
  bool boundary_bridge = true;
  int threads = 1;
};

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  long n_paths = 0;
  double horizon = 0.0;
  /// Far-jump intensity a mu(|z| >= delta).
  double jump_intensity = 0.0;
};

/// Mean discounted payoff of the reflected jump process started at x:
/// int e^{-Lambda_t} f dt plus e^{-Lambda_t} times the g flux of every
/// relocation of an exterior state along the flow of -gamma. Throws
/// HorizonTooShort, InvalidArgument (nonlinear F, thinning bound), and
/// propagates NoHit from the flow.
McEstimate simulate_value(const Nonlinearity& nl, const std::optional<LevyModel>& levy,
                          const ObliqueField& field, const Domain& domain, const Point& x,
                          const JumpProcessConfig& cfg);

}  // namespace nlobc
