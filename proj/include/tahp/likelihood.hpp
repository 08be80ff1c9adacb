#pragma once

#include <functional>

#include "tahp/encoder.hpp"
#include "tahp/intensity.hpp"

namespace tahp {

// Compensator estimator choice. "mc:M" averages M uniform draws per
// inter-event interval (unbiased); "trapezoid" uses the interval endpoints
// of each intensity piece (cheaper, biased for curved intensities).
struct Integrator {
  enum class Kind { MonteCarlo, Trapezoid };
  Kind kind = Kind::MonteCarlo;
  int mc_samples = 100;

  static Integrator monte_carlo(int m) { return {Kind::MonteCarlo, m}; }
  static Integrator trapezoid() { return {Kind::Trapezoid, 0}; }
  static Integrator parse(const std::string& spec);
  std::string str() const;
};

struct NumericsWarnings {
  long clamped_log = 0;
};

// ---- plain (value-only) estimators over [t1, t_last] ----

// sum_k (t_{k+1} - t_k) * mean_m lambda_total(u_m), u_m ~ U(t_k, t_{k+1}).
// Draws M uniforms per interval, intervals outer / samples inner.
double integral_mc(const EventSequence& seq, const ad::Matrix& h,
                   const IntensityView& view, int mc_samples, RngStream& rng);

// sum_k (t_{k+1} - t_k)/2 * (lambda(t_k+) + lambda(t_{k+1}-)); both endpoint
// values come from the piece anchored at event k, so the rule is exact for
// intensities affine in t on each interval.
double integral_trapezoid(const EventSequence& seq, const ad::Matrix& h,
                          const IntensityView& view);

// Function-route estimators for arbitrary intensities (oracle support).
// The trapezoid variant passes from_right=true at each piece's left endpoint
// so that intensities with jumps at events are integrated piece by piece.
double integral_mc_fn(const EventSequence& seq,
                      const std::function<double(double)>& lambda_fn,
                      int mc_samples, RngStream& rng);
double integral_trapezoid_fn(
    const EventSequence& seq,
    const std::function<double(double, bool)>& lambda_limit_fn);

// ---- log-likelihood ----

// Event terms use the pre-event history: log lambda(t_i-) is anchored at
// event i-1. The first event has no predecessor; its term conditions on
// h(t_1) itself and can be dropped by the caller.
struct LoglikeParts {
  double first_term = 0.0;
  double tail_terms = 0.0;
  double compensator = 0.0;
  double value(bool include_first) const {
    return (include_first ? first_term : 0.0) + tail_terms - compensator;
  }
};

LoglikeParts log_likelihood_parts(const EventSequence& seq, const ad::Matrix& h,
                                  const IntensityView& view, Integrator integrator,
                                  RngStream* rng);

// L(s) = sum_i log lambda(t_i | history) - estimated integral of the total
// intensity over [t1, t_last]. Throws NumericsError when the result is NaN.
double log_likelihood(const EventSequence& seq, const ad::Matrix& h,
                      const IntensityView& view, Integrator integrator,
                      RngStream* rng, bool include_first = true);

// ---- prediction losses (events 2..I only) ----

// sum_i (t_i - t_hat_i)^2; t_hat holds predictions for events 2..I.
double time_loss(const EventSequence& seq, const Eigen::VectorXd& t_hat);
// sum_i -log p_hat_i(c_i); rows of p_hat are distributions for events 2..I.
// A zero at the true class clamps the log at -745 and records a warning.
double type_loss(const EventSequence& seq, const ad::Matrix& p_hat,
                 NumericsWarnings* warnings = nullptr);

// ---- differentiable graph builders ----

struct ObjectiveWeights {
  double alpha_time = 0.01;
  double alpha_type = 1.0;
};

ad::Var build_log_likelihood(const EventSequence& seq, const ad::Var& h,
                             const ModelLeaves& leaves, double softplus_beta,
                             Integrator integrator, RngStream* rng,
                             bool include_first);

struct SequenceObjective {
  ad::Var total;      // -L + alpha_type * L_type + alpha_time * L_time
  ad::Var loglike;    // L
  ad::Var time_loss;  // squared time error
  ad::Var type_loss;  // cross entropy
};

// Runs the encoder and assembles the full training objective for one
// sequence. mc_rng is consumed only by the Monte Carlo integrator and
// dropout_rng only in train mode.
SequenceObjective build_sequence_objective(const EventSequence& seq,
                                           const ModelLeaves& leaves,
                                           const ModelConfig& cfg,
                                           const ObjectiveWeights& weights,
                                           Integrator integrator, bool train_mode,
                                           RngStream* dropout_rng,
                                           RngStream* mc_rng);

// sum over the batch of the per-sequence objective, as a plain value.
// Deterministic in seed; per-sequence streams derive from (seed, index).
double objective_value(const std::vector<EventSequence>& batch,
                       const ModelParams& params, const ModelConfig& cfg,
                       const ObjectiveWeights& weights, Integrator integrator,
                       std::uint64_t seed, bool train_mode = false);

}  // namespace tahp
