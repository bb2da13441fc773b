#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "densepoint/errors.hpp"
#include "densepoint/losses.hpp"
#include "densepoint/rng.hpp"
#include "oracles.hpp"

using namespace densepoint;

namespace {

DenseGrid row(std::vector<double> v) {
  const std::size_t n = v.size();
  return DenseGrid(1, n, std::move(v));
}

// Heatmap-like target: a few exact ones, some partial values, zeros elsewhere.
DenseGrid random_target(Rng& rng, std::size_t h, std::size_t w) {
  DenseGrid g(h, w, 0.0);
  for (double& v : g.values()) {
    const double u = rng.uniform();
    if (u < 0.08) {
      v = 1.0;
    } else if (u < 0.5) {
      v = rng.uniform(0.0, 1.0);
    }
  }
  return g;
}

}  // namespace

TEST(NsfLoss, HalfHalfExample) {
  const LossResult r = nsf_loss(row({0.5, 0.5}), row({1.0, 0.0}), LossConfig{});
  const double expected = 0.25 * std::log(2.0) + (1.0 / 16.0) * 0.25 * std::log(2.0);
  EXPECT_NEAR(r.value, expected, 1e-15);
  EXPECT_NEAR(r.value, 0.18412, 5e-6);
}

TEST(NsfLoss, PerfectPredictionApproachesZero) {
  const LossResult r = nsf_loss(row({1.0 - 1e-9, 1e-9, 1e-9}), row({1.0, 0.0, 0.0}), LossConfig{});
  EXPECT_LT(r.value, 1e-12);
}

TEST(NsfLoss, NoPositivesUsesUnitNormaliser) {
  const DenseGrid pred = row({0.3, 0.6});
  const DenseGrid gt = row({0.0, 0.2});
  const LossResult r = nsf_loss(pred, gt, LossConfig{});
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_NEAR(r.value, oracle::nsf(pred, gt, 2.0, 4.0), 1e-15);
}

TEST(NsfLoss, ClampedPixelsHaveZeroGradient) {
  const LossResult r = nsf_loss(row({0.0, 1.0, 0.5}), row({1.0, 0.0, 0.0}), LossConfig{});
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_EQ(r.grad[0], 0.0);
  EXPECT_EQ(r.grad[1], 0.0);
  EXPECT_NE(r.grad[2], 0.0);
}

TEST(NsfLoss, NearOneTargetIsNotPositive) {
  const DenseGrid pred = row({0.5});
  const LossResult almost = nsf_loss(pred, row({1.0 - 1e-12}), LossConfig{});
  EXPECT_NEAR(almost.value, oracle::nsf(pred, row({1.0 - 1e-12}), 2.0, 4.0), 1e-18);
  EXPECT_LT(almost.value, 1e-20);
}

TEST(NsfLoss, ShapeMismatchRejected) {
  EXPECT_THROW(nsf_loss(DenseGrid(2, 2), DenseGrid(2, 3), LossConfig{}), ValidationError);
}

TEST(NsfLoss, MonotoneInPositiveConfidence) {
  double prev = INFINITY;
  for (double p = 0.05; p < 0.96; p += 0.05) {
    const double v = nsf_loss(row({p, 0.1}), row({1.0, 0.0}), LossConfig{}).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(FpRegion, Examples) {
  const LossConfig cfg;
  EXPECT_EQ(fp_region(row({0.0, 0.0}), row({0.5, 0.05}), cfg), (std::vector<std::size_t>{0}));
  EXPECT_TRUE(fp_region(row({0.0, 0.0}), row({0.1, 0.05}), cfg).empty());
  EXPECT_TRUE(fp_region(row({0.3, 1.0}), row({0.9, 0.9}), cfg).empty());
}

TEST(FpLoss, SinglePixelExample) {
  const std::vector<std::size_t> region{0};
  const LossResult r = fp_loss(row({0.5, 0.9}), region, LossConfig{});
  EXPECT_NEAR(r.value, 0.25 * std::log(2.0), 1e-15);
  EXPECT_NEAR(r.value, 0.17329, 5e-6);
  EXPECT_EQ(r.grad[1], 0.0);
}

TEST(FpLoss, EmptyRegionIsZero) {
  const LossResult r = fp_loss(row({0.5, 0.9}), {}, LossConfig{});
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.grad, DenseGrid(1, 2, 0.0));
}

TEST(FpLoss, VanishesAsPredictionVanishes) {
  const std::vector<std::size_t> region{0};
  EXPECT_LT(fp_loss(row({1e-6}), region, LossConfig{}).value, 1e-17);
}

TEST(FpLoss, RegionIndexOutOfRangeRejected) {
  const std::vector<std::size_t> region{5};
  EXPECT_THROW(fp_loss(row({0.5}), region, LossConfig{}), ValidationError);
}

TEST(MseLoss, Examples) {
  EXPECT_NEAR(mse_loss(row({0.2}), row({0.0})).value, 0.04, 1e-17);
  EXPECT_EQ(mse_loss(row({0.3, 0.7}), row({0.3, 0.7})).value, 0.0);
}

TEST(MseLoss, MatchesTwoLoopOracle) {
  Rng rng(44);
  for (int t = 0; t < 20; ++t) {
    const DenseGrid a = oracle::random_grid(rng, 4, 4, -1.0, 1.0);
    const DenseGrid b = oracle::random_grid(rng, 4, 4, -1.0, 1.0);
    const double ref = oracle::mse(a, b);
    EXPECT_LE(std::abs(mse_loss(a, b).value - ref), 1e-15 * std::abs(ref));
  }
}

TEST(TotalLoss, ComponentArithmetic) {
  const DenseGrid z(1, 1, 0.0);
  const LossConfig cfg;
  const TotalLoss t = total_loss({0.2, z}, {0.1, z}, {0.001, z}, cfg);
  EXPECT_NEAR(t.value, 1.3, 1e-15);
  LossConfig zero = cfg;
  zero.lambda1 = 0.0;
  zero.lambda2 = 0.0;
  EXPECT_EQ(total_loss({0.2, z}, {0.1, z}, {0.001, z}, zero).value, 0.2);
  EXPECT_EQ(total_loss({0.0, z}, {0.0, z}, {0.0, z}, cfg).value, 0.0);
}

TEST(TotalLoss, GradientsAreWeightedSums) {
  Rng rng(2);
  const LossConfig cfg;
  const DenseGrid ph = oracle::random_grid(rng, 6, 6, 0.05, 0.95);
  const DenseGrid gh = random_target(rng, 6, 6);
  const DenseGrid pd = oracle::random_grid(rng, 3, 3, 0.0, 0.1);
  const DenseGrid gd = oracle::random_grid(rng, 3, 3, 0.0, 0.1);
  const TotalLoss t = evaluate_total_loss(ph, gh, pd, gd, cfg);
  const LossResult n = nsf_loss(ph, gh, cfg);
  const LossResult f = fp_loss(ph, fp_region(gh, ph, cfg), cfg);
  const LossResult r = mse_loss(pd, gd);
  EXPECT_EQ(t.value, n.value + cfg.lambda1 * f.value + cfg.lambda2 * r.value);
  for (std::size_t i = 0; i < ph.size(); ++i) {
    EXPECT_EQ(t.grad_heatmap[i], n.grad[i] + cfg.lambda1 * f.grad[i]);
  }
  for (std::size_t i = 0; i < pd.size(); ++i) {
    EXPECT_EQ(t.grad_density[i], cfg.lambda2 * r.grad[i]);
  }
}

TEST(LossOracles, RandomInstancesAgree) {
  Rng rng(8);
  const LossConfig cfg;
  for (int t = 0; t < 50; ++t) {
    const DenseGrid pred = oracle::random_grid(rng, 9, 7, 0.0, 1.0);
    const DenseGrid gt = random_target(rng, 9, 7);
    const double n = nsf_loss(pred, gt, cfg).value;
    const double f = fp_loss(pred, fp_region(gt, pred, cfg), cfg).value;
    EXPECT_NEAR(n, oracle::nsf(pred, gt, 2.0, 4.0), 1e-12 * std::abs(n));
    EXPECT_NEAR(f, oracle::fp(pred, gt, 2.0, 0.1), 1e-12 * std::abs(f) + 1e-300);
  }
}

TEST(LossGradients, FiniteDifferencesOnSmallGrids) {
  Rng rng(10);
  const LossConfig cfg;
  for (int t = 0; t < 10; ++t) {
    DenseGrid pred = oracle::random_grid(rng, 5, 5, 0.05, 0.95);
    const DenseGrid gt = random_target(rng, 5, 5);
    const auto region = fp_region(gt, pred, cfg);
    const LossResult n = nsf_loss(pred, gt, cfg);
    const LossResult f = fp_loss(pred, region, cfg);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double dn = oracle::central_difference(
          [&] { return nsf_loss(pred, gt, cfg).value; }, pred[i], 1e-5);
      const double df = oracle::central_difference(
          [&] { return fp_loss(pred, region, cfg).value; }, pred[i], 1e-5);
      EXPECT_LT(oracle::relative_error(n.grad[i], dn), 1e-4);
      EXPECT_LT(oracle::relative_error(f.grad[i], df), 1e-4);
    }
  }
}

TEST(LossConfig, Validation) {
  LossConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.fp_region_thresh = 1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = LossConfig{};
  cfg.gamma = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}
