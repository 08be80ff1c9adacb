#include "tahp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "tahp/metrics.hpp"

namespace tahp {

using nlohmann::json;

void TrainConfig::validate() const {
  std::vector<std::string> errs;
  if (alpha_time < 0.0) errs.push_back("alpha_time must be nonnegative");
  if (alpha_type < 0.0) errs.push_back("alpha_type must be nonnegative");
  if (integrator.kind == Integrator::Kind::MonteCarlo && integrator.mc_samples < 1) {
    errs.push_back("integrator mc sample count must be >= 1");
  }
  if (epochs < 1) errs.push_back("epochs must be >= 1");
  if (batch_size < 1) errs.push_back("batch_size must be >= 1");
  if (lr < 0.0) errs.push_back("lr must be nonnegative");
  if (beta1 < 0.0 || beta1 >= 1.0) errs.push_back("beta1 must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) errs.push_back("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) errs.push_back("eps must be positive");
  if (weight_decay < 0.0) errs.push_back("weight_decay must be nonnegative");
  if (threads < 1) errs.push_back("threads must be >= 1");
  if (!errs.empty()) {
    std::string msg = "invalid train config:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

json TrainHistory::to_json() const {
  json out;
  out["best_epoch"] = best_epoch;
  out["epochs"] = json::array();
  for (const auto& e : epochs) {
    out["epochs"].push_back(json{{"train_nll_per_event", e.train_nll_per_event},
                                 {"dev_nll_per_event", e.dev_nll_per_event},
                                 {"dev_accuracy", e.dev_accuracy},
                                 {"dev_rmse", e.dev_rmse},
                                 {"wall_seconds", e.wall_seconds}});
  }
  return out;
}

TrainHistory TrainHistory::from_json(const json& j) {
  TrainHistory h;
  h.best_epoch = j.at("best_epoch").get<int>();
  for (const auto& e : j.at("epochs")) {
    h.epochs.push_back({e.at("train_nll_per_event").get<double>(),
                        e.at("dev_nll_per_event").get<double>(),
                        e.at("dev_accuracy").get<double>(),
                        e.at("dev_rmse").get<double>(),
                        e.at("wall_seconds").get<double>()});
  }
  return h;
}

AdamOptimizer::AdamOptimizer(const ModelParams& params, const TrainConfig& cfg,
                             std::vector<std::string> frozen)
    : lr_(cfg.lr),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps),
      weight_decay_(cfg.weight_decay) {
  m_.reserve(params.entries.size());
  v_.reserve(params.entries.size());
  frozen_.reserve(params.entries.size());
  for (const auto& e : params.entries) {
    m_.push_back(ad::Matrix::Zero(e.value.rows(), e.value.cols()));
    v_.push_back(ad::Matrix::Zero(e.value.rows(), e.value.cols()));
    bool is_frozen = false;
    for (const auto& name : frozen) is_frozen = is_frozen || e.name == name;
    frozen_.push_back(is_frozen);
  }
}

void AdamOptimizer::step(ModelParams& params) {
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    if (frozen_[i]) continue;
    auto& e = params.entries[i];
    ad::Matrix g = e.grad;
    if (weight_decay_ != 0.0) g += weight_decay_ * e.value;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const ad::Matrix m_hat = m_[i] / bias1;
    const ad::Matrix v_hat = v_[i] / bias2;
    e.value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

double clip_global_grad_norm(ModelParams& params, double max_norm) {
  const double norm = std::sqrt(params.grad_sq_norm());
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& e : params.entries) e.grad *= scale;
  }
  return norm;
}

namespace {

struct SequenceResult {
  ModelLeaves leaves;
  double loglike = 0.0;
  std::size_t events = 0;
};

std::vector<std::string> frozen_param_names(const ModelParams& params,
                                            const ModelConfig& cfg) {
  std::vector<std::string> names;
  if (!cfg.freeze_w_tem) return names;
  for (const auto& e : params.entries) {
    if (e.name.ends_with(".w_tem")) names.push_back(e.name);
  }
  return names;
}

}  // namespace

TrainResult train(const Dataset& train_data, const Dataset& dev_data,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  model_cfg.validate();
  train_cfg.validate();
  train_data.validate();
  dev_data.validate();
  if (train_data.num_types > model_cfg.num_types ||
      dev_data.num_types > model_cfg.num_types) {
    throw ConfigError("train: dataset declares more event types than the model");
  }

  ModelParams params = ModelParams::init(model_cfg, train_cfg.seed);
  AdamOptimizer adam(params, train_cfg, frozen_param_names(params, model_cfg));
  const ObjectiveWeights weights{train_cfg.alpha_time, train_cfg.alpha_type};

  TrainResult result;
  ModelParams best_params = params;
  double best_dev_nll = std::numeric_limits<double>::infinity();

  const std::size_t n_train = train_data.size();
  std::vector<std::size_t> order(n_train);

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle_rng = derive_stream(
        train_cfg.seed, {streams::kShuffle, static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = n_train - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.next_u64() % (i + 1);
      std::swap(order[i], order[j]);
    }

    double epoch_nll = 0.0;
    std::size_t epoch_events = 0;
    std::size_t step = 0;
    for (std::size_t at = 0; at < n_train; at += train_cfg.batch_size, ++step) {
      const std::size_t chunk =
          std::min<std::size_t>(train_cfg.batch_size, n_train - at);
      params.zero_grads();

      std::vector<SequenceResult> results(chunk);
      std::exception_ptr failure;
      auto run_range = [&](std::size_t lo, std::size_t hi) {
        try {
          for (std::size_t j = lo; j < hi; ++j) {
            const EventSequence& seq = train_data.sequences[order[at + j]];
            SequenceResult& r = results[j];
            r.leaves = ModelLeaves::bind(params, model_cfg);
            RngStream dropout_rng = derive_stream(
                train_cfg.seed, {streams::kDropout, static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(step),
                                 static_cast<std::uint64_t>(j)});
            RngStream mc_rng = derive_stream(
                train_cfg.seed, {streams::kMcTrain, static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(step),
                                 static_cast<std::uint64_t>(j)});
            const SequenceObjective obj = build_sequence_objective(
                seq, r.leaves, model_cfg, weights, train_cfg.integrator,
                /*train_mode=*/true, &dropout_rng, &mc_rng);
            if (!std::isfinite(obj.total.item())) {
              throw NumericsError("training diverged: non-finite loss at epoch " +
                                  std::to_string(epoch) + ", step " +
                                  std::to_string(step));
            }
            ad::backward(obj.total);
            r.loglike = obj.loglike.item();
            r.events = seq.size();
          }
        } catch (...) {
          if (!failure) failure = std::current_exception();
        }
      };

      if (train_cfg.threads <= 1 || chunk == 1) {
        run_range(0, chunk);
      } else {
        const std::size_t t_count =
            std::min<std::size_t>(train_cfg.threads, chunk);
        std::vector<std::thread> pool;
        pool.reserve(t_count);
        for (std::size_t t = 0; t < t_count; ++t) {
          const std::size_t lo = t * chunk / t_count;
          const std::size_t hi = (t + 1) * chunk / t_count;
          pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
      }
      if (failure) std::rethrow_exception(failure);

      // Reduction in sequence order keeps results identical across thread counts.
      for (std::size_t j = 0; j < chunk; ++j) {
        results[j].leaves.accumulate_grads(params);
        epoch_nll -= results[j].loglike;
        epoch_events += results[j].events;
      }
      clip_global_grad_norm(params, train_cfg.clip_norm);
      adam.step(params);
    }

    const MetricsReport dev = evaluate(dev_data, model_cfg, params,
                                       Integrator::trapezoid(), train_cfg.seed,
                                       train_cfg.threads);
    EpochStats stats;
    stats.train_nll_per_event = epoch_nll / static_cast<double>(epoch_events);
    stats.dev_nll_per_event = -dev.loglike_per_event;
    stats.dev_accuracy = dev.accuracy;
    stats.dev_rmse = dev.rmse;
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(stats);

    if (stats.dev_nll_per_event < best_dev_nll) {
      best_dev_nll = stats.dev_nll_per_event;
      best_params = params;
      result.history.best_epoch = epoch;
    }
  }

  result.params = std::move(best_params);
  return result;
}

}  // namespace tahp
