#pragma once

// Dense midpoint-rule quadrature oracles for compensator integrals.

#include <functional>

#include "tahp/event_data.hpp"

namespace tahp::test {

// Integrates an arbitrary function on [a, b] with n midpoint evaluations.
inline double riemann(const std::function<double(double)>& f, double a, double b,
                      long n) {
  const double h = (b - a) / static_cast<double>(n);
  double acc = 0.0;
  for (long m = 0; m < n; ++m) {
    acc += f(a + (static_cast<double>(m) + 0.5) * h);
  }
  return acc * h;
}

// Piecewise quadrature over the inter-event intervals of a sequence; the
// integrand receives (anchor index, offset from the anchor event). Points
// are spread evenly across intervals, at least 16 per interval.
inline double riemann_piecewise(const EventSequence& seq,
                                const std::function<double(int, double)>& lambda,
                                long total_points) {
  const long intervals = static_cast<long>(seq.size()) - 1;
  const long per = std::max<long>(16, total_points / intervals);
  double acc = 0.0;
  for (long k = 0; k < intervals; ++k) {
    const double t0 = seq.time(static_cast<std::size_t>(k));
    const double dt = seq.time(static_cast<std::size_t>(k) + 1) - t0;
    const double h = dt / static_cast<double>(per);
    double part = 0.0;
    for (long m = 0; m < per; ++m) {
      part += lambda(static_cast<int>(k), (static_cast<double>(m) + 0.5) * h);
    }
    acc += part * h;
  }
  return acc;
}

}  // namespace tahp::test
