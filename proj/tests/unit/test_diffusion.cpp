#include <gtest/gtest.h>

#include <cmath>

#include "higarment/diffusion.hpp"
#include "higarment/errors.hpp"
#include "higarment/gradcheck.hpp"
#include "higarment/ops.hpp"
#include "support.hpp"

using namespace hg;

TEST(Schedule, LinearBetasAndCumulativeProduct) {
  const NoiseSchedule s;
  EXPECT_EQ(s.steps(), 1000u);
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta(1000), 0.02);
  EXPECT_EQ(s.alpha_bar(0), 1.0);
  double prod = 1.0;
  for (std::size_t t = 1; t <= 1000; ++t) {
    prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0);
    EXPECT_NEAR(s.alpha_bar(t), prod, 1e-14);
    EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  }
  // Standard value for this schedule: alpha_bar(1000) is about 4.04e-5.
  EXPECT_NEAR(s.alpha_bar(1000), 4.04e-5, 1e-6);
}

TEST(Schedule, OutOfRangeRejected) {
  const NoiseSchedule s;
  EXPECT_THROW(s.alpha_bar(1001), ValidationError);
  EXPECT_THROW(s.beta(0), ValidationError);
  EXPECT_THROW(NoiseSchedule(0), ValidationError);
  EXPECT_THROW(NoiseSchedule(10, 0.5, 0.1), ValidationError);
}

TEST(ForwardNoise, TimeZeroIsIdentity) {
  Rng rng(1);
  const Tensor x0 = test::random_matrix(4, 3, rng), eps = test::random_matrix(4, 3, rng);
  EXPECT_EQ(forward_noise(x0, 0, eps, NoiseSchedule()), x0);
}

TEST(ForwardNoise, ZeroNoiseScalesSignal) {
  Rng rng(2);
  const NoiseSchedule s;
  const Tensor x0 = test::random_matrix(4, 3, rng);
  const Tensor xt = forward_noise(x0, 500, Tensor::matrix(4, 3), s);
  for (std::size_t i = 0; i < x0.size(); ++i) EXPECT_DOUBLE_EQ(xt[i], s.sqrt_alpha_bar(500) * x0[i]);
}

TEST(ForwardNoise, MonteCarloVariance) {
  const NoiseSchedule s;
  Rng rng(3);
  for (std::size_t t : {10, 250, 900}) {
    const std::size_t n = 10000;
    Tensor eps = Tensor::matrix(n, 1);
    for (auto& e : eps.data()) e = rng.normal();
    const Tensor xt = forward_noise(Tensor::matrix(n, 1), t, eps, s);
    double m = 0, v = 0;
    for (double x : xt.data()) m += x;
    m /= n;
    for (double x : xt.data()) v += (x - m) * (x - m);
    v /= n - 1;
    EXPECT_NEAR(v / (1.0 - s.alpha_bar(t)), 1.0, 0.05) << "t=" << t;
  }
}

TEST(ForwardNoise, ShapeMismatch) {
  EXPECT_THROW(forward_noise(Tensor::matrix(2, 2), 3, Tensor::matrix(2, 3), NoiseSchedule()), DimensionError);
}

TEST(Ddim, FiftyStepSchedule) {
  const auto ts = ddim_timesteps(1000, 50);
  ASSERT_EQ(ts.size(), 50u);
  EXPECT_EQ(ts.front(), 1000u);
  EXPECT_EQ(ts.back(), 20u);
  for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_EQ(ts[i - 1] - ts[i], 20u);
  EXPECT_THROW(ddim_timesteps(1000, 0), ValidationError);
  EXPECT_THROW(ddim_timesteps(10, 11), ValidationError);
}

TEST(Ddim, TrueNoiseRecoversSignal) {
  const NoiseSchedule s;
  Rng rng(4);
  Tensor x0 = test::random_matrix(6, 3, rng, 0.4);
  for (auto& x : x0.data()) x = std::clamp(x, -0.99, 0.99);
  const Tensor eps = test::random_matrix(6, 3, rng);
  const Tensor xt = forward_noise(x0, 700, eps, s);
  EXPECT_LT(max_abs_diff(ddim_step(xt, eps, 700, 0, s), x0), 1e-12);
  // Intermediate step lands on the same trajectory.
  EXPECT_LT(max_abs_diff(ddim_step(xt, eps, 700, 300, s), forward_noise(x0, 300, eps, s)), 1e-12);
}

TEST(Ddim, PredictedSignalIsClipped) {
  const NoiseSchedule s;
  const Tensor xt = Tensor::matrix(1, 1, 50.0);
  EXPECT_NEAR(ddim_step(xt, Tensor::matrix(1, 1), 10, 0, s)(0, 0), 1.0, 1e-15);
}

TEST(TimestepFeatures, SinCosLayout) {
  const Tensor f = timestep_features(0, 8);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(f(0, k), 0.0);
    EXPECT_EQ(f(0, 4 + k), 1.0);
  }
  EXPECT_NEAR(timestep_features(3, 8)(0, 0), std::sin(3.0), 1e-15);
  EXPECT_NE(timestep_features(10, 8), timestep_features(11, 8));
}

class DenoiserTest : public ::testing::Test {
 protected:
  DenoiserTest() {
    cfg.image_size = 8;
    cfg.width1 = 4;
    cfg.width2 = 8;
    cfg.context_dim = 6;
    cfg.time_dim = 8;
    Rng rng(5);
    d = Denoiser::create(store, "den", cfg, rng);
  }
  DenoiserConfig cfg;
  ParameterStore store;
  Denoiser d;
};

TEST_F(DenoiserTest, OutputShapeAndAttentionMaps) {
  Rng rng(6);
  Tape tape(false);
  std::vector<Tensor> maps;
  Var out = d.forward(tape, tape.constant(test::random_matrix(64, 3, rng)), 10,
                      tape.constant(test::random_matrix(5, 6, rng)), &maps);
  EXPECT_EQ(out.rows(), 64u);
  EXPECT_EQ(out.cols(), 3u);
  ASSERT_EQ(maps.size(), d.cross_attention_layers());
  EXPECT_EQ(maps[0].rows(), 16u);
  EXPECT_EQ(maps[1].rows(), 4u);
  EXPECT_EQ(maps[0].cols(), 5u);
  EXPECT_EQ(d.parameters().size(), store.size());
}

TEST_F(DenoiserTest, DependsOnTimeAndContext) {
  Rng rng(7);
  const Tensor x = test::random_matrix(64, 3, rng), c1 = test::random_matrix(5, 6, rng), c2 = test::random_matrix(5, 6, rng);
  Tape tape(false);
  const Tensor a = d.forward(tape, tape.constant(x), 10, tape.constant(c1)).value();
  EXPECT_GT(max_abs_diff(a, d.forward(tape, tape.constant(x), 900, tape.constant(c1)).value()), 1e-9);
  EXPECT_GT(max_abs_diff(a, d.forward(tape, tape.constant(x), 10, tape.constant(c2)).value()), 1e-9);
}

TEST_F(DenoiserTest, RejectsWrongShapes) {
  Tape tape(false);
  EXPECT_THROW(d.forward(tape, tape.constant(Tensor::matrix(63, 3)), 1, tape.constant(Tensor::matrix(2, 6))), DimensionError);
  EXPECT_THROW(d.forward(tape, tape.constant(Tensor::matrix(64, 3)), 1, tape.constant(Tensor::matrix(2, 5))), DimensionError);
}

TEST_F(DenoiserTest, GradientsMatchFiniteDifferences) {
  Rng rng(8);
  const Tensor x = test::random_matrix(64, 3, rng), c = test::random_matrix(3, 6, rng);
  const Tensor target = test::random_matrix(64, 3, rng);
  auto loss = [&](Tape& t) { return mse(d.forward(t, t.constant(x), 321, t.constant(c)), t.constant(target)); };
  EXPECT_LT(grad_check(loss, store.all()).max_rel_error, 1e-5);
}
