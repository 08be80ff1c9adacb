#include "tahp/stats.hpp"

#include <algorithm>
#include <cmath>

namespace tahp {

double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf) {
  if (samples.empty()) throw DomainError("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(f - lo, hi - f));
  }
  return d;
}

namespace {
// Kolmogorov tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-12 * std::abs(sum)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}
}  // namespace

double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
}

KsResult ks_test_exponential(std::vector<double> samples, double rate) {
  const std::size_t n = samples.size();
  const double d = ks_statistic(
      std::move(samples), [rate](double x) { return 1.0 - std::exp(-rate * x); });
  return {d, ks_pvalue(d, n)};
}

double poisson_mle_rate(const Dataset& ds) {
  double events = 0.0;
  double window = 0.0;
  for (const auto& seq : ds.sequences) {
    events += static_cast<double>(seq.size());
    window += seq.events.back().t - seq.events.front().t;
  }
  if (!(window > 0.0)) throw DomainError("poisson_mle_rate: zero observation window");
  return events / window;
}

double poisson_loglike_per_event(const Dataset& ds, double rate) {
  double ll = 0.0;
  double events = 0.0;
  for (const auto& seq : ds.sequences) {
    const double window = seq.events.back().t - seq.events.front().t;
    ll += static_cast<double>(seq.size()) * std::log(rate) - rate * window;
    events += static_cast<double>(seq.size());
  }
  return ll / events;
}

}  // namespace tahp
