#pragma once

#include "tahp/event_data.hpp"
#include "tahp/model.hpp"

namespace tahp {

// Borrowed view of the intensity parameters inside a ModelParams store.
struct IntensityView {
  const ad::Matrix& base;     // [1 x C] background intensities b_c
  const ad::Matrix& w_alpha;  // [C x D] rows producing the interpolation slope
  const ad::Matrix& w_hist;   // [C x D] rows weighting the hidden state
  double beta;                // softplus softness

  static IntensityView of(const ModelParams& params, const ModelConfig& cfg);
};

double softplus_value(double x, double beta);

// Per-anchor affine pieces of the pre-softplus argument:
//   z_c(t) = slope(i, c) * (t - t_i) / t_i + offset(i, c),  t in [t_i, t_{i+1})
// with slope = w_alpha_c . h_i and offset = b_c + w_hist_c . h_i. Precomputed
// once per sequence so the hot integrator loops cost O(C) per evaluation.
struct IntensityTable {
  ad::Matrix slope;   // [I x C]
  ad::Matrix offset;  // [I x C]
  std::vector<double> times;
  double beta = 1.0;

  static IntensityTable build(const EventSequence& seq, const ad::Matrix& h,
                              const IntensityView& view);
  double lambda_c_anchored(int c, int anchor, double dt) const;
  double lambda_total_anchored(int anchor, double dt) const;
};

// Conditional intensity of type c at time t given hidden representations H
// (row i = h(t_i)). The anchor is the latest event with t_i <= t; the value
// is softplus_beta(b_c + (w_alpha_c . h_i)(t - t_i)/t_i + w_hist_c . h_i).
// Queries before the first event have no history and are a domain error.
double lambda_c(int c, double t, const EventSequence& seq, const ad::Matrix& h,
                const IntensityView& view);

// Sum of lambda_c over all event types.
double lambda_total(double t, const EventSequence& seq, const ad::Matrix& h,
                    const IntensityView& view);

}  // namespace tahp
