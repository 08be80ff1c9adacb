#pragma once

#include "tahp/trainer.hpp"

namespace tahp {

struct NextPrediction {
  double t_hat = 0.0;
  Eigen::VectorXd p_hat;  // distribution over event types
  int c_hat = 0;          // argmax, ties broken by smallest index
};

// Neural next-event heads: t_hat = w_time . h, p_hat = softmax(w_type . h).
NextPrediction predict_next(const Eigen::VectorXd& h, const ad::Matrix& w_time,
                            const ad::Matrix& w_type);

struct MetricsReport {
  // Primary Loglike: per-event normalization over all events, first-event
  // term included, requested integrator.
  double loglike_per_event = 0.0;
  // Alternate normalizations / conventions, always recorded alongside.
  double loglike_per_sequence = 0.0;
  double loglike_per_event_drop_first = 0.0;
  double loglike_per_event_trapezoid = 0.0;
  double accuracy = 0.0;
  double rmse = 0.0;
  long n_predictions = 0;  // sum of (length - 1): no prediction for event 1
  std::string variant;
  std::string dataset;
  std::string integrator;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

// Full evaluation protocol: predictions for events 2..I from the preceding
// hidden state, accuracy, time RMSE in raw units, Loglike normalizations.
// Dropout is off; with the trapezoid integrator the result is seed-free.
MetricsReport evaluate(const Dataset& data, const ModelConfig& cfg,
                       const ModelParams& params, Integrator integrator,
                       std::uint64_t seed, int threads = 1);

// Ablation harness: trains the temporal-augmented and biased variants with
// identical seeds and data order, evaluates both on the test split, and
// pairs the reports with per-metric deltas (taa minus biased).
struct AblationResult {
  TrainResult taa, biased;
  MetricsReport taa_report, biased_report;

  nlohmann::json report_json() const;
};

AblationResult ablate(const DatasetSplits& splits, ModelConfig base_cfg,
                      const TrainConfig& train_cfg);

}  // namespace tahp
