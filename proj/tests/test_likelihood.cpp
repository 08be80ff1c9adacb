#include <cmath>

#include "doctest.h"
#include "support/quadrature.hpp"
#include "support/test_models.hpp"
#include "tahp/likelihood.hpp"

using namespace tahp;
using ad::Matrix;

namespace {

// Constant-intensity parameterization: slope and history weights are zero,
// so lambda_total is C * softplus(b) everywhere.
ModelParams constant_intensity_params(const ModelConfig& cfg, double b,
                                      std::uint64_t seed = 41) {
  ModelParams params = ModelParams::init(cfg, seed);
  params.at("intensity.base").setConstant(b);
  params.at("intensity.w_alpha").setZero();
  params.at("intensity.w_hist").setZero();
  return params;
}

struct NeuralFixture {
  ModelConfig cfg = test::tiny_config();
  EventSequence seq;
  ModelParams params = ModelParams::init(cfg, 42);
  Matrix h;

  NeuralFixture() {
    RngStream rng(43);
    seq = test::random_seq(rng, 8, cfg.num_types);
    h = test::encode_values(seq, params, cfg);
  }
  IntensityView view() const { return IntensityView::of(params, cfg); }
  double window() const { return seq.events.back().t - seq.time(0); }
};

}  // namespace

TEST_SUITE("likelihood") {

TEST_CASE("integrator spec strings parse and print") {
  CHECK(Integrator::parse("mc:100").mc_samples == 100);
  CHECK(Integrator::parse("trapezoid").kind == Integrator::Kind::Trapezoid);
  CHECK(Integrator::parse("mc:7").str() == "mc:7");
  CHECK_THROWS_AS(Integrator::parse("mc:0"), ConfigError);
  CHECK_THROWS_AS(Integrator::parse("simpson"), ConfigError);
}

TEST_CASE("monte carlo is exact for a constant intensity, any M and seed") {
  const ModelConfig cfg = test::tiny_config();
  const ModelParams params = constant_intensity_params(cfg, 0.4);
  const EventSequence seq = test::make_seq({{0.5, 0}, {1.7, 1}, {2.2, 0}, {4.0, 1}});
  const Matrix h = test::encode_values(seq, params, cfg);
  const IntensityView view = IntensityView::of(params, cfg);
  const double kappa = cfg.num_types * softplus_value(0.4, cfg.softplus_beta);
  const double expected = kappa * (4.0 - 0.5);
  for (const int m : {1, 3, 64}) {
    for (const std::uint64_t seed : {1ull, 2ull, 99ull}) {
      RngStream rng(seed);
      CHECK(integral_mc(seq, h, view, m, rng) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("monte carlo replication mean matches dense quadrature within 1%") {
  NeuralFixture f;
  const IntensityTable table = IntensityTable::build(f.seq, f.h, f.view());
  const double oracle = test::riemann_piecewise(
      f.seq,
      [&](int anchor, double dt) { return table.lambda_total_anchored(anchor, dt); },
      1000000);
  double mean = 0.0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    RngStream rng = derive_stream(700, {static_cast<std::uint64_t>(r)});
    mean += integral_mc(f.seq, f.h, f.view(), 64, rng);
  }
  mean /= reps;
  CHECK(std::abs(mean - oracle) / oracle < 0.01);
}

TEST_CASE("doubling the sample count halves the estimator variance") {
  NeuralFixture f;
  auto variance_at = [&](int m, std::uint64_t tag) {
    const int reps = 500;
    std::vector<double> values(reps);
    double mean = 0.0;
    for (int r = 0; r < reps; ++r) {
      RngStream rng = derive_stream(tag, {static_cast<std::uint64_t>(r)});
      values[r] = integral_mc(f.seq, f.h, f.view(), m, rng);
      mean += values[r];
    }
    mean /= reps;
    double var = 0.0;
    for (const double v : values) var += (v - mean) * (v - mean);
    return var / (reps - 1);
  };
  const double ratio = variance_at(16, 811) / variance_at(32, 812);
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("trapezoid is exact for constant and affine intensities") {
  const ModelConfig cfg = test::tiny_config();
  const EventSequence seq = test::make_seq({{1.0, 0}, {1.8, 1}, {3.0, 0}});

  const ModelParams constant = constant_intensity_params(cfg, 0.2);
  const Matrix hc = test::encode_values(seq, constant, cfg);
  const double kappa = cfg.num_types * softplus_value(0.2, cfg.softplus_beta);
  CHECK(integral_trapezoid(seq, hc, IntensityView::of(constant, cfg)) ==
        doctest::Approx(kappa * 2.0).epsilon(1e-14));

  // huge softness turns softplus into the identity on positive arguments,
  // so the intensity is exactly affine on each interval
  ModelConfig affine_cfg = cfg;
  affine_cfg.softplus_beta = 1e16;
  ModelParams params = ModelParams::init(affine_cfg, 44);
  params.at("intensity.base").setConstant(2.0);
  params.at("intensity.w_hist").setZero();
  params.at("intensity.w_alpha").setConstant(0.05);
  const Matrix h = test::encode_values(seq, params, affine_cfg);
  const IntensityView view = IntensityView::of(params, affine_cfg);
  const IntensityTable table = IntensityTable::build(seq, h, view);
  double analytic = 0.0;
  for (int k = 0; k + 2 < static_cast<int>(seq.size()) + 1; ++k) {
    const double dt = seq.time(k + 1) - seq.time(k);
    for (int c = 0; c < affine_cfg.num_types; ++c) {
      // integral of offset + slope * s / t_k over s in [0, dt]
      analytic += table.offset(k, c) * dt +
                  table.slope(k, c) * dt * dt / (2.0 * seq.time(k));
    }
  }
  CHECK(integral_trapezoid(seq, h, view) ==
        doctest::Approx(analytic).epsilon(1e-12));
}

TEST_CASE("trapezoid overestimates convex intensities") {
  const EventSequence seq = test::make_seq({{1.0, 0}, {2.5, 0}});
  const auto convex = [](double t, bool) { return std::exp(-t); };
  const double trap = integral_trapezoid_fn(seq, convex);
  const double exact = std::exp(-1.0) - std::exp(-2.5);
  CHECK(trap > exact);
  CHECK(trap == doctest::Approx(exact).epsilon(0.1));
}

TEST_CASE("two events under unit intensity give minus the gap") {
  ModelConfig cfg = test::tiny_config(1);
  // softplus(b) = 1  <=>  b = log(e - 1)
  const ModelParams params =
      constant_intensity_params(cfg, std::log(std::exp(1.0) - 1.0));
  const EventSequence seq = test::make_seq({{0.8, 0}, {2.3, 0}});
  const Matrix h = test::encode_values(seq, params, cfg);
  const double ll = log_likelihood(seq, h, IntensityView::of(params, cfg),
                                   Integrator::trapezoid(), nullptr);
  CHECK(ll == doctest::Approx(-(2.3 - 0.8)).epsilon(1e-12));
}

TEST_CASE("monte carlo and trapezoid log-likelihoods agree on a smooth model") {
  NeuralFixture f;
  RngStream rng(45);
  const double ll_mc = log_likelihood(f.seq, f.h, f.view(),
                                      Integrator::monte_carlo(10000), &rng);
  const double ll_trap =
      log_likelihood(f.seq, f.h, f.view(), Integrator::trapezoid(), nullptr);
  CHECK(ll_mc == doctest::Approx(ll_trap).epsilon(0.02));
}

TEST_CASE("raising every background rate raises the event terms") {
  NeuralFixture f;
  auto event_terms = [&](double bump) {
    ModelParams params = f.params;
    params.at("intensity.base").array() += bump;
    const LoglikeParts parts =
        log_likelihood_parts(f.seq, f.h, IntensityView::of(params, f.cfg),
                             Integrator::trapezoid(), nullptr);
    return parts.first_term + parts.tail_terms;
  };
  double prev = event_terms(0.0);
  for (const double bump : {0.5, 1.0, 2.0}) {
    const double cur = event_terms(bump);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("prediction losses match their definitions") {
  const EventSequence seq = test::make_seq({{1.0, 1}, {2.0, 0}, {3.0, 2}});

  // perfect predictions cost nothing
  Eigen::VectorXd exact(2);
  exact << 2.0, 3.0;
  CHECK(time_loss(seq, exact) == 0.0);
  Matrix point_mass = Matrix::Zero(2, 4);
  point_mass(0, 0) = 1.0;
  point_mass(1, 2) = 1.0;
  CHECK(type_loss(seq, point_mass) == 0.0);

  // hand-computed square error: (2 - 2.5)^2 + (3 - 3.5)^2 = 0.5
  Eigen::VectorXd off(2);
  off << 2.5, 3.5;
  CHECK(time_loss(seq, off) == doctest::Approx(0.5).epsilon(1e-15));

  // uniform guess over four types costs log 4 per event
  const Matrix uniform = Matrix::Constant(2, 4, 0.25);
  CHECK(type_loss(seq, uniform) ==
        doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-14));

  // a zero at the true class clamps the log and records a warning
  Matrix zero_at_true = Matrix::Constant(2, 4, 0.25);
  zero_at_true(0, 0) = 0.0;
  NumericsWarnings warnings;
  CHECK(type_loss(seq, zero_at_true, &warnings) ==
        doctest::Approx(745.0 + std::log(4.0)).epsilon(1e-12));
  CHECK(warnings.clamped_log == 1);
}

TEST_CASE("objective with zero weights is exactly the negated log-likelihood") {
  NeuralFixture f;
  const Integrator integ = Integrator::trapezoid();
  const double obj = objective_value({f.seq}, f.params, f.cfg, {0.0, 0.0}, integ, 7);
  const double ll = log_likelihood(f.seq, f.h, f.view(), integ, nullptr,
                                   f.cfg.include_first_event_term);
  CHECK(obj == -ll);
}

TEST_CASE("objective is additive over the batch and recombines its parts") {
  NeuralFixture f;
  RngStream rng(46);
  const EventSequence second = test::random_seq(rng, 5, f.cfg.num_types);
  const Integrator integ = Integrator::trapezoid();
  const ObjectiveWeights weights{0.01, 1.0};

  const double both =
      objective_value({f.seq, second}, f.params, f.cfg, weights, integ, 7);
  const double first = objective_value({f.seq}, f.params, f.cfg, weights, integ, 7);
  // per-sequence streams depend on the index, so recompute the second
  // sequence at its batch position
  const ModelLeaves leaves = ModelLeaves::bind(f.params, f.cfg);
  RngStream d1 = derive_stream(7, {streams::kDropout, 1});
  RngStream m1 = derive_stream(7, {streams::kMcTrain, 1});
  const SequenceObjective obj2 = build_sequence_objective(
      second, leaves, f.cfg, weights, integ, false, &d1, &m1);
  CHECK(both == doctest::Approx(first + obj2.total.item()).epsilon(1e-14));

  // recombination: total = -L + alpha_type * L_type + alpha_time * L_time
  const double recombined = -obj2.loglike.item() +
                            weights.alpha_type * obj2.type_loss.item() +
                            weights.alpha_time * obj2.time_loss.item();
  CHECK(obj2.total.item() == doctest::Approx(recombined).epsilon(1e-14));

  CHECK_THROWS_AS(objective_value({}, f.params, f.cfg, weights, integ, 7),
                  DomainError);
}

TEST_CASE("graph and plain likelihood paths agree to double precision") {
  NeuralFixture f;
  const ModelLeaves leaves = ModelLeaves::bind(f.params, f.cfg);
  const ad::Var h_var = encode(f.seq, leaves, f.cfg, false);

  for (const Integrator integ :
       {Integrator::trapezoid(), Integrator::monte_carlo(64)}) {
    RngStream rng_graph = derive_stream(55, {streams::kMcTrain});
    RngStream rng_plain = derive_stream(55, {streams::kMcTrain});
    const double graph =
        build_log_likelihood(f.seq, h_var, leaves, f.cfg.softplus_beta, integ,
                             &rng_graph, true)
            .item();
    const double plain =
        log_likelihood(f.seq, f.h, f.view(), integ, &rng_plain, true);
    CHECK(graph == doctest::Approx(plain).epsilon(1e-12));
  }
}

TEST_CASE("sequences shorter than two events are rejected") {
  NeuralFixture f;
  const EventSequence one = test::make_seq({{1.0, 0}});
  Matrix h1(1, f.cfg.d_model);
  h1.setZero();
  RngStream rng(3);
  CHECK_THROWS_AS(integral_mc(one, h1, f.view(), 4, rng), DomainError);
  CHECK_THROWS_AS(integral_trapezoid(one, h1, f.view()), DomainError);
  CHECK_THROWS_AS(
      log_likelihood(one, h1, f.view(), Integrator::trapezoid(), nullptr),
      DomainError);
}

}  // TEST_SUITE
