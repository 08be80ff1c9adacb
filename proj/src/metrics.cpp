#include "tahp/metrics.hpp"

#include <cmath>
#include <thread>

namespace tahp {

using ad::Matrix;
using nlohmann::json;

NextPrediction predict_next(const Eigen::VectorXd& h, const Matrix& w_time,
                            const Matrix& w_type) {
  if (w_time.cols() != h.size() || w_type.cols() != h.size()) {
    throw ShapeError("predict_next: hidden size " + std::to_string(h.size()) +
                     " does not match heads " + ad::shape_str(w_time) + " / " +
                     ad::shape_str(w_type));
  }
  NextPrediction out;
  out.t_hat = (w_time * h)(0);
  Eigen::VectorXd logits = w_type * h;
  const double top = logits.maxCoeff();
  out.p_hat = (logits.array() - top).exp();
  out.p_hat /= out.p_hat.sum();
  out.c_hat = 0;
  for (Eigen::Index c = 1; c < out.p_hat.size(); ++c) {
    if (out.p_hat(c) > out.p_hat(out.c_hat)) out.c_hat = static_cast<int>(c);
  }
  return out;
}

json MetricsReport::to_json() const {
  return json{{"loglike_per_event", loglike_per_event},
              {"loglike_per_sequence", loglike_per_sequence},
              {"loglike_per_event_drop_first", loglike_per_event_drop_first},
              {"loglike_per_event_trapezoid", loglike_per_event_trapezoid},
              {"accuracy", accuracy},
              {"rmse", rmse},
              {"n_predictions", n_predictions},
              {"variant", variant},
              {"dataset", dataset},
              {"integrator", integrator},
              {"seed", seed}};
}

MetricsReport evaluate(const Dataset& data, const ModelConfig& cfg,
                       const ModelParams& params, Integrator integrator,
                       std::uint64_t seed, int threads) {
  if (data.sequences.empty()) throw DomainError("evaluate: empty dataset");
  data.validate();
  cfg.validate();
  const IntensityView view = IntensityView::of(params, cfg);

  struct SeqStats {
    LoglikeParts main, trap;
    long correct = 0;
    double sq_err = 0.0;
    std::size_t events = 0;
  };
  std::vector<SeqStats> stats(data.size());

  auto run_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const EventSequence& seq = data.sequences[i];
      const ModelLeaves leaves = ModelLeaves::bind(params, cfg);
      const Matrix h = encode(seq, leaves, cfg, /*train_mode=*/false).value();

      SeqStats& s = stats[i];
      s.events = seq.size();
      s.trap = log_likelihood_parts(seq, h, view, Integrator::trapezoid(), nullptr);
      if (integrator.kind == Integrator::Kind::Trapezoid) {
        s.main = s.trap;
      } else {
        RngStream rng = derive_stream(seed, {streams::kMcEval, i});
        s.main = log_likelihood_parts(seq, h, view, integrator, &rng);
      }
      for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
        const NextPrediction pred =
            predict_next(h.row(static_cast<Eigen::Index>(k)).transpose(),
                         params.at("predict.w_time"), params.at("predict.w_type"));
        if (pred.c_hat == seq.type(k + 1)) ++s.correct;
        const double d = pred.t_hat - seq.time(k + 1);
        s.sq_err += d * d;
      }
    }
  };

  if (threads <= 1 || data.size() == 1) {
    run_range(0, data.size());
  } else {
    const std::size_t t_count = std::min<std::size_t>(threads, data.size());
    std::vector<std::thread> pool;
    pool.reserve(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
      pool.emplace_back(run_range, t * data.size() / t_count,
                        (t + 1) * data.size() / t_count);
    }
    for (auto& th : pool) th.join();
  }

  double ll = 0.0, ll_drop = 0.0, ll_trap = 0.0, sq_err = 0.0;
  long correct = 0, predictions = 0;
  std::size_t events = 0;
  for (const auto& s : stats) {
    ll += s.main.value(cfg.include_first_event_term);
    ll_drop += s.main.value(false);
    ll_trap += s.trap.value(cfg.include_first_event_term);
    correct += s.correct;
    sq_err += s.sq_err;
    predictions += static_cast<long>(s.events) - 1;
    events += s.events;
  }

  MetricsReport report;
  report.loglike_per_event = ll / static_cast<double>(events);
  report.loglike_per_sequence = ll / static_cast<double>(data.size());
  report.loglike_per_event_drop_first =
      ll_drop / static_cast<double>(events - data.size());
  report.loglike_per_event_trapezoid = ll_trap / static_cast<double>(events);
  report.accuracy = static_cast<double>(correct) / static_cast<double>(predictions);
  report.rmse = std::sqrt(sq_err / static_cast<double>(predictions));
  report.n_predictions = predictions;
  report.variant = to_string(cfg.variant);
  report.dataset = data.name;
  report.integrator = integrator.str();
  report.seed = seed;
  return report;
}

json AblationResult::report_json() const {
  json delta{{"loglike_per_event",
              taa_report.loglike_per_event - biased_report.loglike_per_event},
             {"accuracy", taa_report.accuracy - biased_report.accuracy},
             {"rmse", taa_report.rmse - biased_report.rmse}};
  return json{{"variants", json::array({taa_report.to_json(),
                                        biased_report.to_json()})},
              {"delta", delta}};
}

AblationResult ablate(const DatasetSplits& splits, ModelConfig base_cfg,
                      const TrainConfig& train_cfg) {
  AblationResult out;
  ModelConfig cfg_taa = base_cfg;
  cfg_taa.variant = AttentionVariant::TemporalAugmented;
  ModelConfig cfg_biased = base_cfg;
  cfg_biased.variant = AttentionVariant::Biased;

  out.taa = train(splits.train, splits.dev, cfg_taa, train_cfg);
  out.biased = train(splits.train, splits.dev, cfg_biased, train_cfg);

  const Integrator report_integrator = Integrator::monte_carlo(100);
  out.taa_report = evaluate(splits.test, cfg_taa, out.taa.params, report_integrator,
                            train_cfg.seed, train_cfg.threads);
  out.biased_report =
      evaluate(splits.test, cfg_biased, out.biased.params, report_integrator,
               train_cfg.seed, train_cfg.threads);
  return out;
}

}  // namespace tahp
