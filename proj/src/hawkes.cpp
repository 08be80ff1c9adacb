#include "tahp/hawkes.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "tahp/rng.hpp"

namespace tahp {

double HawkesGroundTruth::branching_spectral_radius() const {
  if (mu.size() == 0) return 0.0;
  Eigen::MatrixXd branching = alpha.cwiseQuotient(delta);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(branching, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

void HawkesGroundTruth::validate() const {
  const int c = num_types();
  if (c < 1) throw ConfigError("hawkes: need at least one event type");
  if (alpha.rows() != c || alpha.cols() != c || delta.rows() != c ||
      delta.cols() != c) {
    throw ConfigError("hawkes: alpha/delta must be " + std::to_string(c) + "x" +
                      std::to_string(c));
  }
  if ((mu.array() < 0.0).any()) throw ConfigError("hawkes: mu must be nonnegative");
  if ((alpha.array() < 0.0).any()) {
    throw ConfigError("hawkes: alpha must be nonnegative");
  }
  if ((delta.array() <= 0.0).any()) {
    throw ConfigError("hawkes: delta must be positive");
  }
  const double rho = branching_spectral_radius();
  if (!(rho < 1.0)) {
    throw ConfigError("hawkes: non-stationary parameters, spectral radius " +
                      std::to_string(rho) + " >= 1");
  }
}

EventSequence simulate_thinning(const HawkesGroundTruth& gt, double horizon,
                                std::uint64_t seed) {
  gt.validate();
  if (!(horizon > 0.0)) {
    throw ConfigError("simulate_thinning: horizon must be positive, got " +
                      std::to_string(horizon));
  }
  const int c_total = gt.num_types();
  RngStream rng(seed);
  EventSequence seq;

  // excite(c, c') tracks sum_j exp(-delta(c,c') (t - t_j)) over past type-c'
  // events; decayed in closed form between candidate times.
  Eigen::MatrixXd excite = Eigen::MatrixXd::Zero(c_total, c_total);
  Eigen::VectorXd lambda(c_total);
  auto intensities_at = [&](const Eigen::MatrixXd& exc) {
    for (int c = 0; c < c_total; ++c) {
      lambda(c) = gt.mu(c) + gt.alpha.row(c).cwiseProduct(exc.row(c)).sum();
    }
  };

  double t = 0.0;
  while (true) {
    intensities_at(excite);
    const double bound = lambda.sum();
    if (!(bound > 0.0)) break;  // nothing can ever fire again
    const double gap = rng.exponential(bound);
    const double t_next = t + gap;
    if (t_next > horizon) break;

    Eigen::MatrixXd decayed =
        excite.cwiseProduct((-gt.delta * (t_next - t)).array().exp().matrix());
    intensities_at(decayed);
    const double total = lambda.sum();
    t = t_next;
    excite = std::move(decayed);
    if (rng.uniform01() * bound > total) continue;  // thinned out

    // attribute the event type proportionally to the per-type intensities
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    int type = c_total - 1;
    for (int c = 0; c < c_total; ++c) {
      acc += lambda(c);
      if (u <= acc) {
        type = c;
        break;
      }
    }
    seq.events.push_back({t, type});
    excite.col(type).array() += 1.0;
  }
  return seq;
}

double hawkes_total_intensity(const HawkesGroundTruth& gt, const EventSequence& seq,
                              double t, bool from_right) {
  const int c_total = gt.num_types();
  double total = gt.mu.sum();
  for (const auto& e : seq.events) {
    if (e.t > t || (!from_right && e.t == t)) break;
    for (int c = 0; c < c_total; ++c) {
      total += gt.alpha(c, e.type) * std::exp(-gt.delta(c, e.type) * (t - e.t));
    }
  }
  return total;
}

double exact_compensator(const HawkesGroundTruth& gt, const EventSequence& seq,
                         double t_end) {
  if (seq.empty()) throw DomainError("exact_compensator: empty sequence");
  if (t_end < seq.events.back().t) {
    throw DomainError("exact_compensator: t_end " + std::to_string(t_end) +
                      " precedes the last event at " +
                      std::to_string(seq.events.back().t));
  }
  const int c_total = gt.num_types();
  const double t1 = seq.events.front().t;
  double total = gt.mu.sum() * (t_end - t1);
  for (const auto& e : seq.events) {
    for (int c = 0; c < c_total; ++c) {
      const double d = gt.delta(c, e.type);
      total += gt.alpha(c, e.type) / d * (1.0 - std::exp(-d * (t_end - e.t)));
    }
  }
  return total;
}

Dataset simulate_dataset(const HawkesGroundTruth& gt, std::size_t count,
                         double horizon, std::uint64_t seed,
                         const std::string& name) {
  gt.validate();
  Dataset ds;
  ds.num_types = gt.num_types();
  ds.name = name;
  std::uint64_t attempt = 0;
  while (ds.sequences.size() < count) {
    EventSequence seq = simulate_thinning(
        gt, horizon, derive_seed(seed, {streams::kSimulate, attempt}));
    ++attempt;
    if (seq.size() >= 2) ds.sequences.push_back(std::move(seq));
    if (attempt > 100 * (count + 10)) {
      throw ConfigError(
          "simulate_dataset: parameters rarely produce 2+ events per sequence; "
          "raise mu or the horizon");
    }
  }
  return ds;
}

}  // namespace tahp
