#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "tahp/event_data.hpp"

namespace tahp {

// Multivariate Hawkes process with exponential kernels:
//   lambda_c(t) = mu(c) + sum_{t_j < t} alpha(c, c_j) * exp(-delta(c, c_j) * (t - t_j))
// alpha(c, c') is the jump that a type-c' event adds to the type-c intensity;
// delta(c, c') is its decay rate. Exponential kernels give the simulator a
// closed-form compensator, which the integrator tests use as an oracle.
struct HawkesGroundTruth {
  Eigen::VectorXd mu;     // C, nonnegative
  Eigen::MatrixXd alpha;  // C x C, nonnegative
  Eigen::MatrixXd delta;  // C x C, positive

  int num_types() const { return static_cast<int>(mu.size()); }
  // Spectral radius of the branching matrix alpha ./ delta.
  double branching_spectral_radius() const;
  // Rejects negative rates, non-positive decays, and non-stationary
  // (spectral radius >= 1) parameterizations.
  void validate() const;
};

// Ogata's modified thinning on (0, horizon]. The proposal rate is the total
// intensity just after the current time, which upper-bounds the intensity
// until the next event because exponential kernels only decay between events.
// Deterministic in the seed. May return fewer than 2 events.
EventSequence simulate_thinning(const HawkesGroundTruth& gt, double horizon,
                                std::uint64_t seed);

// Total intensity at t. Events with t_j < t contribute (left limit at event
// times); set from_right to include an event exactly at t.
double hawkes_total_intensity(const HawkesGroundTruth& gt, const EventSequence& seq,
                              double t, bool from_right = false);

// Closed-form integral of the total intensity over [t1, t_end]:
//   sum_c mu(c) * (t_end - t1)
//   + sum_j sum_c (alpha / delta)(c, c_j) * (1 - exp(-delta(c, c_j) * (t_end - t_j)))
// Requires t_end >= last event time.
double exact_compensator(const HawkesGroundTruth& gt, const EventSequence& seq,
                         double t_end);

// Simulates until `count` sequences with at least 2 events each have been
// produced; per-sequence seeds derive from (seed, attempt index).
Dataset simulate_dataset(const HawkesGroundTruth& gt, std::size_t count,
                         double horizon, std::uint64_t seed,
                         const std::string& name);

}  // namespace tahp
