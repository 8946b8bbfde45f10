// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "usim/harness.hpp"
#include "usim/metrics.hpp"
#include "usim/stats.hpp"
#include "usim/synth.hpp"

using namespace usim;

namespace {

// 64x64 inputs cannot carry the default 4-level pyramid, 5-scale MS-SSIM or
// 4-scale VIF; these are the deepest stacks that fit.
MetricParams small_params() {
  MetricParams p;
  p.cwssim.pyramid = {3, 6};
  p.msssim = MsSsimParams::truncated(3);
  p.vif.scales = 3;
  return p;
}

GrayImage add_noise(const GrayImage& img, std::uint64_t seed, double sd) {
  const GrayImage n = oracle::gaussian_noise(img.width(), img.height(), seed, 0.0, sd);
  GrayImage out = img;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += n.data()[i];
  return out;
}

}  // namespace

TEST(Mse, Examples) {
  const GrayImage a = oracle::random_image(9, 7, 1);
  EXPECT_EQ(mse(a, a).value, 0.0);
  EXPECT_DOUBLE_EQ(mse(GrayImage(4, 4, 0.0), GrayImage(4, 4, 12.0)).value, 144.0);
  EXPECT_DOUBLE_EQ(mse(GrayImage(2, 1, std::vector<double>{1, 3}), GrayImage(2, 1, std::vector<double>{2, 5})).value, 2.5);
  EXPECT_THROW(mse(GrayImage(2, 2), GrayImage(2, 3)), Error);
}

TEST(Psnr, Examples) {
  const GrayImage a = oracle::random_image(9, 7, 1);
  EXPECT_EQ(psnr(a, a).value, std::numeric_limits<double>::infinity());
  const GrayImage x(2, 1, std::vector<double>{1, 3}), y(2, 1, std::vector<double>{2, 5});
  EXPECT_NEAR(psnr(x, y).value, 44.1514, 5e-5);
  EXPECT_DOUBLE_EQ(psnr(x, y).value, 10.0 * std::log10(255.0 * 255.0 / 2.5));
  EXPECT_DOUBLE_EQ(psnr(GrayImage(1, 1, 0.0), GrayImage(1, 1, 1.0), 1.0).value, 0.0);
}

TEST(Ssim, LocalMomentsMatchDoubleLoop) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GrayImage x = oracle::random_image(16, 16, seed), y = oracle::random_image(16, 16, seed + 100);
    const LocalMoments m = local_moments(x, y, 11, 1.5);
    ASSERT_EQ(m.mu_x.width(), 6);
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 6; ++i) {
        const auto o = oracle::window_moments(x, y, i, j, 11, 1.5);
        EXPECT_NEAR(m.mu_x(i, j), o.mu_x, 1e-10);
        EXPECT_NEAR(m.mu_y(i, j), o.mu_y, 1e-10);
        EXPECT_NEAR(m.var_x(i, j), o.var_x, 1e-10);
        EXPECT_NEAR(m.var_y(i, j), o.var_y, 1e-10);
        EXPECT_NEAR(m.cov(i, j), o.cov, 1e-10);
      }
  }
}

TEST(Ssim, IdentityAndConstants) {
  const GrayImage a = oracle::random_image(32, 32, 3);
  EXPECT_NEAR(ssim(a, a).value, 1.0, 1e-12);
  const double c1 = std::pow(0.01 * 255, 2);
  const double expect = (2 * 100.0 * 150.0 + c1) / (100.0 * 100.0 + 150.0 * 150.0 + c1);
  const auto s = ssim(GrayImage(20, 20, 100.0), GrayImage(20, 20, 150.0));
  ASSERT_TRUE(s.map);
  for (double v : s.map->pixels()) EXPECT_NEAR(v, expect, 1e-12);
  EXPECT_NEAR(s.value, expect, 1e-12);
}

TEST(Ssim, ContrastInversion) {
  GrayImage ref = oracle::random_image(16, 16, 21, 27.5, 227.5);
  const double m = mean(ref.pixels());
  for (double& v : ref.data()) v += 127.5 - m;
  GrayImage inv(16, 16);
  for (std::size_t i = 0; i < inv.size(); ++i) inv.data()[i] = 255.0 - ref.data()[i];
  const double v = ssim(ref, inv).value;
  EXPECT_LT(v, 0.5);
  EXPECT_LT(v, 0.0);  // structure term is close to -1 everywhere
  EXPECT_NEAR(v, oracle::ssim(ref, inv), 1e-10);
}

TEST(Ssim, MatchesOracleOnNoisyPair) {
  const GrayImage a = oracle::random_image(24, 20, 5);
  const GrayImage b = add_noise(a, 6, 20.0);
  EXPECT_NEAR(ssim(a, b).value, oracle::ssim(a, b), 1e-10);
  EXPECT_THROW(ssim(GrayImage(10, 10), GrayImage(10, 10)), Error);
}

TEST(MsSsim, Examples) {
  const GrayImage a = oracle::random_image(176, 176, 2);
  EXPECT_NEAR(ms_ssim(a, a).value, 1.0, 1e-9);
  MsSsimParams one;
  one.scales = 1;
  one.weights = {1.0};
  const GrayImage b = add_noise(a, 3, 15.0);
  EXPECT_NEAR(ms_ssim(a, b, one).value, ssim(a, b).value, 1e-12);
  EXPECT_THROW(ms_ssim(GrayImage(100, 100), GrayImage(100, 100)), Error);
  MsSsimParams bad;
  bad.weights = {0.5, 0.5, 0.5, 0.5, 0.5};
  EXPECT_THROW(ms_ssim(a, a, bad), Error);
}

TEST(MsSsim, DefaultWeightsSumToOne) {
  const auto w = MsSsimParams{}.weights;
  EXPECT_NEAR(compensated_sum(w), 1.0, 1e-15);
  EXPECT_NEAR(w[2] / w[1], 0.3001 / 0.2856, 1e-12);
}

TEST(MsSsim, SpeckledPhantomStrictlyBetween) {
  const GrayImage ph = make_phantom(benchmark::standard_phantom(), 1);
  const GrayImage sp = apply_speckle(ph, SpeckleSpec{0.5, 1.0, 1});
  const double v = ms_ssim(ph, sp).value;
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 1.0);
}

TEST(CwSsim, IdentityIsOne) {
  const GrayImage a = oracle::random_image(128, 128, 4);
  EXPECT_NEAR(cw_ssim(a, a).value, 1.0, 1e-9);
}

TEST(CwSsim, OnePixelShiftBeatsSsim) {
  const GrayImage a = make_phantom(benchmark::smooth_phantom_128(), 0);
  const GrayImage b = shift(a, 1, 0);
  const double cw = cw_ssim(a, b).value;
  EXPECT_GE(cw, 0.90);
  EXPECT_GT(cw, ssim(a, b).value);
}

TEST(CwSsim, IndependentNoiseIsDissimilar) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    total += cw_ssim(oracle::gaussian_noise(128, 128, seed, 128, 30),
                     oracle::gaussian_noise(128, 128, seed + 1000, 128, 30))
                 .value;
  EXPECT_LT(total / 10.0, 0.5);
}

TEST(CwSsim, PyramidOverloadAgrees) {
  const GrayImage a = oracle::random_image(128, 128, 5), b = add_noise(a, 5, 10);
  const CwSsimParams p;
  EXPECT_EQ(cw_ssim(a, b, p).value, cw_ssim(decompose(a, p.pyramid), decompose(b, p.pyramid), p).value);
  EXPECT_EQ(ReferenceScorer(Metric::cwssim, a)(b), cw_ssim(a, b).value);
  EXPECT_THROW(cw_ssim(GrayImage(100, 100), GrayImage(100, 100)), Error);
}

TEST(Vif, Examples) {
  const GrayImage a = oracle::random_image(128, 128, 6);
  EXPECT_NEAR(vif(a, a).value, 1.0, 1e-6);
  const double blurred = vif(a, gaussian_blur(a, 1.5)).value;
  EXPECT_GT(blurred, 0.0);
  EXPECT_LT(blurred, 1.0);
  try {
    vif(GrayImage(128, 128, 9.0), a);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_reference);
  }
}

TEST(Metrics, Symmetry) {
  const MetricParams p = small_params();
  const GrayImage a = oracle::random_image(64, 64, 7), b = add_noise(a, 8, 25);
  for (Metric m : {Metric::mse, Metric::psnr, Metric::ssim, Metric::msssim, Metric::cwssim})
    EXPECT_NEAR(evaluate(m, a, b, p).value, evaluate(m, b, a, p).value, 1e-9) << to_string(m);
  const GrayImage blurred = gaussian_blur(a, 1.5);
  EXPECT_NE(vif(a, blurred, p.vif).value, vif(blurred, a, p.vif).value);
}

TEST(Metrics, IdentityMaximal) {
  const MetricParams p = small_params();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GrayImage x = oracle::random_image(64, 64, seed);
    const GrayImage y = add_noise(x, seed + 500, 10.0);
    for (Metric m : kAllMetrics) {
      const double self = evaluate(m, x, x, p).value, other = evaluate(m, x, y, p).value;
      if (higher_is_better(m))
        EXPECT_GE(self, other) << to_string(m) << " seed " << seed;
      else
        EXPECT_LE(self, other) << to_string(m) << " seed " << seed;
    }
  }
}

TEST(Metrics, Bounded) {
  const MetricParams p = small_params();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const GrayImage x = oracle::random_image(64, 64, seed);
    const GrayImage y = oracle::random_image(64, 64, seed + 50);
    for (Metric m : {Metric::ssim, Metric::msssim}) {
      const double v = evaluate(m, x, y, p).value;
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
    const double cw = evaluate(Metric::cwssim, x, y, p).value;
    EXPECT_GT(cw, 0.0);
    EXPECT_LE(cw, 1.0);
    EXPECT_GE(evaluate(Metric::vif, x, y, p).value, 0.0);
  }
}

TEST(Metrics, ParseNames) {
  for (Metric m : kAllMetrics) EXPECT_EQ(parse_metric(to_string(m)), m);
  EXPECT_THROW(parse_metric("ms-ssim"), Error);
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_series(std::vector<double>{0, 5, 10}), (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(normalize_series(std::vector<double>{-2, 0, 6}), (std::vector<double>{0, 0.25, 1}));
  try {
    normalize_series(std::vector<double>{3, 3, 3});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::constant_series);
  }
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(normalize_series(std::vector<double>{inf, 20, 30}), (std::vector<double>{1, 0, 1}));
  EXPECT_THROW(normalize_series(std::vector<double>{1}), Error);
}

TEST(Normalize, ExactEndpoints) {
  const GrayImage noise = oracle::random_image(50, 1, 3, -7.3, 19.1);
  const auto n = normalize_series(noise.pixels());
  EXPECT_EQ(*std::min_element(n.begin(), n.end()), 0.0);
  EXPECT_EQ(*std::max_element(n.begin(), n.end()), 1.0);
}
