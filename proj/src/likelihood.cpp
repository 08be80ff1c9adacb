#include "tahp/likelihood.hpp"

#include <cmath>

namespace tahp {

using ad::Matrix;
using ad::Var;

Integrator Integrator::parse(const std::string& spec) {
  if (spec == "trapezoid") return trapezoid();
  if (spec.rfind("mc:", 0) == 0) {
    int m = 0;
    try {
      m = std::stoi(spec.substr(3));
    } catch (const std::exception&) {
      throw ConfigError("integrator: cannot parse sample count in '" + spec + "'");
    }
    if (m < 1) throw ConfigError("integrator: mc sample count must be >= 1");
    return monte_carlo(m);
  }
  throw ConfigError("integrator: expected mc:M or trapezoid, got '" + spec + "'");
}

std::string Integrator::str() const {
  return kind == Kind::Trapezoid ? "trapezoid" : "mc:" + std::to_string(mc_samples);
}

namespace {

void require_length(const EventSequence& seq, const char* who) {
  if (seq.size() < 2) {
    throw DomainError(std::string(who) + ": sequence needs at least 2 events, got " +
                      std::to_string(seq.size()));
  }
}

}  // namespace

double integral_mc(const EventSequence& seq, const Matrix& h,
                   const IntensityView& view, int mc_samples, RngStream& rng) {
  require_length(seq, "integral_mc");
  if (mc_samples < 1) throw ConfigError("integral_mc: sample count must be >= 1");
  const IntensityTable table = IntensityTable::build(seq, h, view);
  const auto n = seq.size();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double t0 = seq.time(k);
    const double dt = seq.time(k + 1) - t0;
    double acc = 0.0;
    for (int m = 0; m < mc_samples; ++m) {
      const double u = t0 + dt * rng.uniform01();
      acc += table.lambda_total_anchored(static_cast<int>(k), u - t0);
    }
    total += dt * acc / mc_samples;
  }
  return total;
}

double integral_trapezoid(const EventSequence& seq, const Matrix& h,
                          const IntensityView& view) {
  require_length(seq, "integral_trapezoid");
  const IntensityTable table = IntensityTable::build(seq, h, view);
  const auto n = seq.size();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = seq.time(k + 1) - seq.time(k);
    const double left = table.lambda_total_anchored(static_cast<int>(k), 0.0);
    const double right = table.lambda_total_anchored(static_cast<int>(k), dt);
    total += 0.5 * dt * (left + right);
  }
  return total;
}

double integral_mc_fn(const EventSequence& seq,
                      const std::function<double(double)>& lambda_fn,
                      int mc_samples, RngStream& rng) {
  require_length(seq, "integral_mc_fn");
  if (mc_samples < 1) throw ConfigError("integral_mc_fn: sample count must be >= 1");
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
    const double t0 = seq.time(k);
    const double dt = seq.time(k + 1) - t0;
    double acc = 0.0;
    for (int m = 0; m < mc_samples; ++m) acc += lambda_fn(t0 + dt * rng.uniform01());
    total += dt * acc / mc_samples;
  }
  return total;
}

double integral_trapezoid_fn(
    const EventSequence& seq,
    const std::function<double(double, bool)>& lambda_limit_fn) {
  require_length(seq, "integral_trapezoid_fn");
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
    const double t0 = seq.time(k);
    const double t1 = seq.time(k + 1);
    total += 0.5 * (t1 - t0) *
             (lambda_limit_fn(t0, /*from_right=*/true) +
              lambda_limit_fn(t1, /*from_right=*/false));
  }
  return total;
}

LoglikeParts log_likelihood_parts(const EventSequence& seq, const Matrix& h,
                                  const IntensityView& view, Integrator integrator,
                                  RngStream* rng) {
  require_length(seq, "log_likelihood");
  const IntensityTable table = IntensityTable::build(seq, h, view);
  LoglikeParts parts;
  parts.first_term = std::log(table.lambda_total_anchored(0, 0.0));
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const double dt = seq.time(i) - seq.time(i - 1);
    parts.tail_terms +=
        std::log(table.lambda_total_anchored(static_cast<int>(i - 1), dt));
  }
  if (integrator.kind == Integrator::Kind::MonteCarlo) {
    if (rng == nullptr) {
      throw ConfigError("log_likelihood: the Monte Carlo integrator needs an RNG");
    }
    parts.compensator = integral_mc(seq, h, view, integrator.mc_samples, *rng);
  } else {
    parts.compensator = integral_trapezoid(seq, h, view);
  }
  return parts;
}

double log_likelihood(const EventSequence& seq, const Matrix& h,
                      const IntensityView& view, Integrator integrator,
                      RngStream* rng, bool include_first) {
  const double value =
      log_likelihood_parts(seq, h, view, integrator, rng).value(include_first);
  if (std::isnan(value)) throw NumericsError("log_likelihood: result is NaN");
  return value;
}

double time_loss(const EventSequence& seq, const Eigen::VectorXd& t_hat) {
  require_length(seq, "time_loss");
  if (static_cast<std::size_t>(t_hat.size()) != seq.size() - 1) {
    throw ShapeError("time_loss: need " + std::to_string(seq.size() - 1) +
                     " predictions, got " + std::to_string(t_hat.size()));
  }
  double total = 0.0;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const double d = seq.time(i) - t_hat(static_cast<Eigen::Index>(i - 1));
    total += d * d;
  }
  return total;
}

double type_loss(const EventSequence& seq, const Matrix& p_hat,
                 NumericsWarnings* warnings) {
  require_length(seq, "type_loss");
  if (static_cast<std::size_t>(p_hat.rows()) != seq.size() - 1) {
    throw ShapeError("type_loss: need " + std::to_string(seq.size() - 1) +
                     " distributions, got " + std::to_string(p_hat.rows()));
  }
  double total = 0.0;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const double p = p_hat(static_cast<Eigen::Index>(i - 1), seq.type(i));
    double lp = std::log(p);
    if (!(lp > -745.0)) {
      lp = -745.0;
      if (warnings != nullptr) ++warnings->clamped_log;
    }
    total -= lp;
  }
  return total;
}

namespace {

// Slopes [I x C] and offsets-with-base [I x C], the graph twin of
// IntensityTable.
struct IntensityGraph {
  Var slope;
  Var offset;
};

IntensityGraph build_intensity_graph(const Var& h, const ModelLeaves& leaves) {
  IntensityGraph g;
  g.slope = ad::matmul(h, ad::transpose(leaves.intensity_w_alpha));
  g.offset = ad::add_rowvec(ad::matmul(h, ad::transpose(leaves.intensity_w_hist)),
                            leaves.intensity_base);
  return g;
}

}  // namespace

Var build_log_likelihood(const EventSequence& seq, const Var& h,
                         const ModelLeaves& leaves, double softplus_beta,
                         Integrator integrator, RngStream* rng,
                         bool include_first) {
  require_length(seq, "build_log_likelihood");
  const auto n = static_cast<Eigen::Index>(seq.size());
  const IntensityGraph g = build_intensity_graph(h, leaves);
  const Var slope_anchor = ad::slice_rows(g.slope, 0, n - 1);
  const Var offset_anchor = ad::slice_rows(g.offset, 0, n - 1);
  const Eigen::Index c_total = g.slope.cols();

  Matrix interp(n - 1, c_total);
  Eigen::VectorXd deltas(n - 1);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const double dt = seq.time(k + 1) - seq.time(k);
    deltas(k) = dt;
    interp.row(k).setConstant(dt / seq.time(k));
  }

  // log lambda(t_i-) terms, anchored at the predecessor event
  const Var z_right =
      ad::add(ad::mul_const(slope_anchor, interp), offset_anchor);
  const Var lam_right = ad::softplus(z_right, softplus_beta);
  const Var lam_right_sum = ad::rowwise_sum(lam_right);
  Var events = ad::sum_all(ad::log_of(lam_right_sum));
  if (include_first) {
    const Var lam_first =
        ad::softplus(ad::slice_rows(g.offset, 0, 1), softplus_beta);
    events = ad::add(events, ad::log_of(ad::rowwise_sum(lam_first)));
  }

  Var compensator;
  if (integrator.kind == Integrator::Kind::Trapezoid) {
    const Var lam_left_sum =
        ad::rowwise_sum(ad::softplus(offset_anchor, softplus_beta));
    Matrix half_delta = (0.5 * deltas).eval();
    compensator = ad::sum_all(
        ad::mul_const(ad::add(lam_left_sum, lam_right_sum), half_delta));
  } else {
    if (rng == nullptr) {
      throw ConfigError("build_log_likelihood: the Monte Carlo integrator needs an RNG");
    }
    const int m = integrator.mc_samples;
    if (m < 1) throw ConfigError("build_log_likelihood: mc samples must be >= 1");
    // Interpolation factors (u - t_k)/t_k, drawn interval-major to match the
    // plain estimator's consumption order.
    Matrix factors(n - 1, m);
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      for (int s = 0; s < m; ++s) {
        factors(k, s) = deltas(k) * rng->uniform01() / seq.time(k);
      }
    }
    Var lam_sum;
    for (Eigen::Index c = 0; c < c_total; ++c) {
      const Var z = ad::add_colvec(
          ad::mul_const(ad::bcast_cols(ad::col(slope_anchor, c), m), factors),
          ad::col(offset_anchor, c));
      const Var lam = ad::softplus(z, softplus_beta);
      lam_sum = c == 0 ? lam : ad::add(lam_sum, lam);
    }
    Matrix delta_col = deltas;
    compensator =
        ad::sum_all(ad::mul_const(ad::rowwise_mean(lam_sum), delta_col));
  }
  return ad::sub(events, compensator);
}

SequenceObjective build_sequence_objective(const EventSequence& seq,
                                           const ModelLeaves& leaves,
                                           const ModelConfig& cfg,
                                           const ObjectiveWeights& weights,
                                           Integrator integrator, bool train_mode,
                                           RngStream* dropout_rng,
                                           RngStream* mc_rng) {
  require_length(seq, "build_sequence_objective");
  const Var h = encode(seq, leaves, cfg, train_mode, dropout_rng);
  const auto n = static_cast<Eigen::Index>(seq.size());

  SequenceObjective out;
  out.loglike =
      build_log_likelihood(seq, h, leaves, cfg.softplus_beta, integrator, mc_rng,
                           cfg.include_first_event_term);

  const Var h_anchor = ad::slice_rows(h, 0, n - 1);
  const Var t_hat = ad::matmul(h_anchor, ad::transpose(leaves.w_time));
  Matrix neg_targets(n - 1, 1);
  for (Eigen::Index k = 0; k + 1 < n; ++k) neg_targets(k, 0) = -seq.time(k + 1);
  out.time_loss = ad::sum_all(ad::square(ad::add_const(t_hat, neg_targets)));

  const Var logits = ad::matmul(h_anchor, ad::transpose(leaves.w_type));
  const Var probs = ad::softmax_rows(logits);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> picks;
  picks.reserve(static_cast<std::size_t>(n - 1));
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    picks.emplace_back(k, seq.type(static_cast<std::size_t>(k + 1)));
  }
  out.type_loss = ad::neg(ad::sum_all(ad::log_clamped(ad::pick_entries(probs, picks))));

  out.total = ad::add(ad::neg(out.loglike),
                      ad::add(ad::scalar_mul(out.type_loss, weights.alpha_type),
                              ad::scalar_mul(out.time_loss, weights.alpha_time)));
  return out;
}

double objective_value(const std::vector<EventSequence>& batch,
                       const ModelParams& params, const ModelConfig& cfg,
                       const ObjectiveWeights& weights, Integrator integrator,
                       std::uint64_t seed, bool train_mode) {
  if (batch.empty()) throw DomainError("objective: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ModelLeaves leaves = ModelLeaves::bind(params, cfg);
    RngStream dropout_rng = derive_stream(seed, {streams::kDropout, i});
    RngStream mc_rng = derive_stream(seed, {streams::kMcTrain, i});
    const SequenceObjective obj =
        build_sequence_objective(batch[i], leaves, cfg, weights, integrator,
                                 train_mode, &dropout_rng, &mc_rng);
    total += obj.total.item();
  }
  return total;
}

}  // namespace tahp
