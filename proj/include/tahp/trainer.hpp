#pragma once

#include "tahp/likelihood.hpp"

namespace tahp {

struct TrainConfig {
  double alpha_time = 0.01;
  double alpha_type = 1.0;
  Integrator integrator = Integrator::monte_carlo(100);
  int epochs = 10;
  int batch_size = 16;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

struct EpochStats {
  double train_nll_per_event = 0.0;  // running training NLL (train integrator)
  double dev_nll_per_event = 0.0;    // trapezoid, eval mode
  double dev_accuracy = 0.0;
  double dev_rmse = 0.0;
  double wall_seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // argmin of dev_nll_per_event

  nlohmann::json to_json() const;
  static TrainHistory from_json(const nlohmann::json& j);
};

struct TrainResult {
  ModelParams params;  // parameters from the best dev epoch
  TrainHistory history;
};

// Elementwise Adam with bias correction. State is kept per parameter entry
// in store order; `frozen` names are skipped entirely (no state update).
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& params, const TrainConfig& cfg,
                std::vector<std::string> frozen = {});
  // Applies one update from params.entries[i].grad. Weight decay is the
  // decoupled form: grad + weight_decay * value.
  void step(ModelParams& params);

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
  std::vector<ad::Matrix> m_, v_;
  std::vector<bool> frozen_;
};

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_grad_norm(ModelParams& params, double max_norm);

// Mini-batch Adam over shuffled training sequences. Per-sequence graphs are
// built independently (optionally across threads) and their gradients are
// reduced in sequence order, so results are identical for any thread count.
// Dev metrics are recorded each epoch; the returned parameters are the ones
// with the best dev NLL. NaN loss aborts with the epoch/step in the message.
TrainResult train(const Dataset& train_data, const Dataset& dev_data,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg);

}  // namespace tahp
