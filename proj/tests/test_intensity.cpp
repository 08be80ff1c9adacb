#include <cmath>

#include "doctest.h"
#include "support/finite_diff.hpp"
#include "support/test_models.hpp"
#include "tahp/intensity.hpp"

using namespace tahp;
using ad::Matrix;

namespace {

struct Fixture {
  ModelConfig cfg = test::tiny_config();
  EventSequence seq = test::make_seq({{0.5, 0}, {1.4, 1}, {2.0, 0}, {3.1, 1}});
  ModelParams params = ModelParams::init(cfg, 31);
  Matrix h;

  Fixture() { h = test::encode_values(seq, params, cfg); }
  IntensityView view() const { return IntensityView::of(params, cfg); }
};

}  // namespace

TEST_SUITE("intensity") {

TEST_CASE("at an event time the interpolation term vanishes") {
  Fixture f;
  const IntensityView view = f.view();
  for (std::size_t i = 0; i < f.seq.size(); ++i) {
    for (int c = 0; c < f.cfg.num_types; ++c) {
      const double got = lambda_c(c, f.seq.time(i), f.seq, f.h, view);
      const double z = view.base(0, c) +
                       view.w_hist.row(c).dot(f.h.row(static_cast<Eigen::Index>(i)));
      CHECK(got == doctest::Approx(softplus_value(z, view.beta)).epsilon(1e-14));
    }
  }
}

TEST_CASE("intensities are strictly positive everywhere") {
  Fixture f;
  const IntensityView view = f.view();
  RngStream rng(32);
  for (int k = 0; k < 200; ++k) {
    const double t = rng.uniform(f.seq.time(0), f.seq.events.back().t + 2.0);
    for (int c = 0; c < f.cfg.num_types; ++c) {
      CHECK(lambda_c(c, t, f.seq, f.h, view) > 0.0);
    }
    CHECK(lambda_total(t, f.seq, f.h, view) > 0.0);
  }
}

TEST_CASE("queries before the first event are a domain error") {
  Fixture f;
  CHECK_THROWS_AS(lambda_c(0, 0.49, f.seq, f.h, f.view()), DomainError);
  CHECK_THROWS_AS(lambda_total(0.0, f.seq, f.h, f.view()), DomainError);
}

TEST_CASE("the total intensity is the sum over types") {
  Fixture f;
  const IntensityView view = f.view();
  RngStream rng(33);
  for (int k = 0; k < 50; ++k) {
    const double t = rng.uniform(f.seq.time(0), f.seq.events.back().t + 1.0);
    double sum = 0.0;
    for (int c = 0; c < f.cfg.num_types; ++c) sum += lambda_c(c, t, f.seq, f.h, view);
    CHECK(std::abs(lambda_total(t, f.seq, f.h, view) - sum) <= 1e-12);
  }
}

TEST_CASE("a single-type model collapses total onto lambda_c") {
  ModelConfig cfg = test::tiny_config(1);
  const ModelParams params = ModelParams::init(cfg, 34);
  const EventSequence seq = test::make_seq({{0.7, 0}, {1.3, 0}, {2.2, 0}});
  const Matrix h = test::encode_values(seq, params, cfg);
  const IntensityView view = IntensityView::of(params, cfg);
  for (double t : {0.7, 1.0, 1.3, 1.9, 2.2, 3.0}) {
    CHECK(lambda_total(t, seq, h, view) ==
          doctest::Approx(lambda_c(0, t, seq, h, view)).epsilon(1e-15));
  }
}

TEST_CASE("all-zero parameters give C log 2 at unit softness") {
  ModelConfig cfg = test::tiny_config();
  ModelParams params = ModelParams::init(cfg, 35);
  params.at("intensity.base").setZero();
  params.at("intensity.w_alpha").setZero();
  params.at("intensity.w_hist").setZero();
  const EventSequence seq = test::make_seq({{0.5, 0}, {1.5, 1}});
  const Matrix h = test::encode_values(seq, params, cfg);
  const IntensityView view = IntensityView::of(params, cfg);
  CHECK(lambda_total(1.0, seq, h, view) ==
        doctest::Approx(cfg.num_types * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("a positive slope makes the intensity strictly increasing") {
  ModelConfig cfg = test::tiny_config();
  cfg.num_layers = 0;  // hidden states are the raw embeddings
  ModelParams params = ModelParams::init(cfg, 36);
  params.at("embed") = Matrix::Constant(cfg.d_model, cfg.num_types, 0.5);
  params.at("intensity.w_alpha").setConstant(0.3);  // slope = 0.3 * 0.5 * D > 0
  const EventSequence seq = test::make_seq({{1.0, 0}, {4.0, 1}});
  const Matrix h = test::encode_values(seq, params, cfg);
  const IntensityView view = IntensityView::of(params, cfg);
  double prev = 0.0;
  for (int g = 0; g < 100; ++g) {
    const double t = 1.0 + 2.99 * g / 99.0;
    const double lam = lambda_c(0, t, seq, h, view);
    if (g > 0) CHECK(lam > prev);
    prev = lam;
  }
}

TEST_CASE("the intensity is continuous within each piece") {
  Fixture f;
  const IntensityView view = f.view();
  for (std::size_t k = 0; k + 1 < f.seq.size(); ++k) {
    const double a = f.seq.time(k);
    const double b = f.seq.time(k + 1);
    double prev = lambda_total(a, f.seq, f.h, view);
    for (int g = 1; g < 200; ++g) {
      const double t = a + (b - a) * 0.999 * g / 199.0;
      const double lam = lambda_total(t, f.seq, f.h, view);
      CHECK(std::abs(lam - prev) < 0.2);  // no jumps on a fine grid
      prev = lam;
    }
  }
}

TEST_CASE("softness rescaling never changes the argmax over types") {
  Fixture f;
  RngStream rng(37);
  for (int k = 0; k < 20; ++k) {
    const double t = rng.uniform(f.seq.time(0), f.seq.events.back().t);
    int prev_argmax = -1;
    for (const double beta : {0.5, 1.0, 2.0, 7.5}) {
      IntensityView view{f.params.at("intensity.base"),
                         f.params.at("intensity.w_alpha"),
                         f.params.at("intensity.w_hist"), beta};
      int argmax = 0;
      for (int c = 1; c < f.cfg.num_types; ++c) {
        if (lambda_c(c, t, f.seq, f.h, view) >
            lambda_c(argmax, t, f.seq, f.h, view)) {
          argmax = c;
        }
      }
      if (prev_argmax >= 0) CHECK(argmax == prev_argmax);
      prev_argmax = argmax;
    }
  }
}

TEST_CASE("lambda gradients match finite differences on a toy model") {
  Fixture f;
  const int type = 1;
  const int anchor = 1;
  const double dt = 0.25;
  const double t_query = f.seq.time(static_cast<std::size_t>(anchor)) + dt;

  // reverse mode through the full graph, encoder included
  f.params.zero_grads();
  const ModelLeaves leaves = ModelLeaves::bind(f.params, f.cfg);
  const ad::Var h = encode(f.seq, leaves, f.cfg, false);
  const ad::Var slope =
      ad::matmul(h, ad::transpose(leaves.intensity_w_alpha));
  const ad::Var offset = ad::add_rowvec(
      ad::matmul(h, ad::transpose(leaves.intensity_w_hist)), leaves.intensity_base);
  const double g = dt / f.seq.time(static_cast<std::size_t>(anchor));
  const ad::Var z = ad::add(ad::scalar_mul(ad::entry(slope, anchor, type), g),
                            ad::entry(offset, anchor, type));
  const ad::Var lam = ad::softplus(z, f.cfg.softplus_beta);
  ad::backward(lam);
  leaves.accumulate_grads(f.params);

  // the graph value agrees with the plain evaluation path
  CHECK(lam.item() ==
        doctest::Approx(lambda_c(type, t_query, f.seq, f.h, f.view()))
            .epsilon(1e-12));

  const auto res = test::check_gradients(
      f.params,
      [&](const ModelParams& p) {
        const Matrix hp = test::encode_values(f.seq, p, f.cfg);
        return lambda_c(type, t_query, f.seq, hp, IntensityView::of(p, f.cfg));
      },
      1e-5);
  INFO("worst: " << res.worst_param);
  CHECK(res.max_rel_err < 1e-4);
}

}  // TEST_SUITE
