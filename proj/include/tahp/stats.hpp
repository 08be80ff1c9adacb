#pragma once

#include <functional>
#include <vector>

#include "tahp/event_data.hpp"

namespace tahp {

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf);

// Asymptotic KS p-value with the Stephens small-sample correction
// lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * d.
double ks_pvalue(double d, std::size_t n);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

KsResult ks_test_exponential(std::vector<double> samples, double rate);

// Homogeneous-Poisson baseline for the total process, fitted on the same
// observation windows [t1, t_last] the model is scored on:
//   rate = (total events) / (total window length).
double poisson_mle_rate(const Dataset& ds);
// Per-event log-likelihood of that baseline: every event contributes
// log(rate) and each sequence pays rate * (t_last - t1).
double poisson_loglike_per_event(const Dataset& ds, double rate);

}  // namespace tahp
