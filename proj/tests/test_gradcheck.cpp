#include "doctest.h"
#include "support/finite_diff.hpp"
#include "support/test_models.hpp"
#include "tahp/likelihood.hpp"

using namespace tahp;

namespace {

// Mirrors objective_value's stream derivation for a single sequence, with a
// backward pass added; finite differences then re-evaluate objective_value
// itself, so both routes consume identical Monte Carlo draws.
void analytic_grads(const EventSequence& seq, ModelParams& params,
                    const ModelConfig& cfg, const ObjectiveWeights& weights,
                    Integrator integrator, std::uint64_t seed) {
  params.zero_grads();
  const ModelLeaves leaves = ModelLeaves::bind(params, cfg);
  RngStream dropout_rng = derive_stream(seed, {streams::kDropout, 0});
  RngStream mc_rng = derive_stream(seed, {streams::kMcTrain, 0});
  const SequenceObjective obj =
      build_sequence_objective(seq, leaves, cfg, weights, integrator,
                               /*train_mode=*/false, &dropout_rng, &mc_rng);
  ad::backward(obj.total);
  leaves.accumulate_grads(params);
}

double run_check(const ModelConfig& cfg, Integrator integrator,
                 std::uint64_t seed = 5) {
  const EventSequence seq =
      test::make_seq({{0.4, 0}, {1.1, 1}, {1.9, 0}});
  ModelParams params = ModelParams::init(cfg, seed);
  const ObjectiveWeights weights{0.01, 1.0};
  analytic_grads(seq, params, cfg, weights, integrator, seed);
  const auto res = test::check_gradients(
      params,
      [&](const ModelParams& p) {
        return objective_value({seq}, p, cfg, weights, integrator, seed,
                               /*train_mode=*/false);
      },
      1e-5);
  INFO("worst: " << res.worst_param << " analytic " << res.worst_analytic
                 << " numeric " << res.worst_numeric);
  CHECK(res.max_rel_err < 1e-4);
  return res.max_rel_err;
}

}  // namespace

TEST_SUITE("gradcheck") {

TEST_CASE("full objective gradients match finite differences (trapezoid)") {
  run_check(test::tiny_config(), Integrator::trapezoid());
}

TEST_CASE("full objective gradients match finite differences (monte carlo)") {
  run_check(test::tiny_config(), Integrator::monte_carlo(8));
}

TEST_CASE("gradients through the LSTM post-processing stage") {
  ModelConfig cfg = test::tiny_config();
  cfg.d_rnn = 8;
  cfg.rnn_cell = RnnCell::Lstm;
  run_check(cfg, Integrator::trapezoid());
}

TEST_CASE("gradients through the GRU post-processing stage") {
  ModelConfig cfg = test::tiny_config();
  cfg.d_rnn = 8;
  cfg.rnn_cell = RnnCell::Gru;
  run_check(cfg, Integrator::trapezoid());
}

TEST_CASE("gradients for the biased attention variant") {
  ModelConfig cfg = test::tiny_config();
  cfg.variant = AttentionVariant::Biased;
  run_check(cfg, Integrator::trapezoid());
}

}  // TEST_SUITE
