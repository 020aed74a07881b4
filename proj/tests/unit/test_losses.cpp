#include <gtest/gtest.h>

#include <cmath>

#include "tilesense/losses.hpp"
#include "tilesense/rng.hpp"

namespace tilesense {
namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); }

TEST(FocalLoss, Limits) {
  const LossConfig cfg;
  EXPECT_EQ(focal_loss(1.0, cfg), 0.0);
  EXPECT_NEAR(focal_loss(0.5, cfg), 0.25 * 0.25 * std::log(2.0), 1e-15);
  const LossConfig ce{1.0, 0.0, 1.0};
  for (double p : {1e-9, 0.1, 0.5, 0.9}) EXPECT_NEAR(focal_loss(p, ce), -std::log(p), 1e-9);
  EXPECT_THROW(focal_loss(0.0, cfg), std::invalid_argument);
  EXPECT_THROW(focal_loss(1.1, cfg), std::invalid_argument);
  EXPECT_THROW((LossConfig{0.0, 2.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((LossConfig{0.25, -1.0, 1.0}.validate()), std::invalid_argument);
}

TEST(FocalLoss, SoftmaxGradientMatchesFiniteDifferences) {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(20);
    std::vector<double> z(n), g(n);
    for (double& v : z) v = rng.normal(0, 3);
    const std::size_t target = rng.below(n);
    const LossConfig cfg{rng.uniform(0.05, 1.0), rng.uniform(0.0, 4.0), 1.0};
    softmax_focal_loss(z, target, cfg, g);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> zp = z, zm = z;
      zp[j] += 1e-5;
      zm[j] -= 1e-5;
      const double fd = (softmax_focal_loss(zp, target, cfg) - softmax_focal_loss(zm, target, cfg)) / 2e-5;
      EXPECT_LE(rel_err(g[j], fd), 1e-5) << "t=" << t << " j=" << j;
      sum += g[j];
    }
    EXPECT_NEAR(sum, 0.0, 1e-12);  // softmax is shift invariant
  }
}

TEST(FocalLoss, StableForExtremeLogits) {
  std::vector<double> g(3);
  const double l = softmax_focal_loss(std::vector<double>{800.0, -800.0, 0.0}, 1, LossConfig{}, g);
  EXPECT_TRUE(std::isfinite(l));
  for (double v : g) EXPECT_TRUE(std::isfinite(v));
}

TEST(SmoothL1, ValuesAndGradient) {
  EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1(-2.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1_grad(0.5), 0.5);
  EXPECT_DOUBLE_EQ(smooth_l1_grad(-2.0), -1.0);
}

class DetectorLoss : public ::testing::Test {
 protected:
  void SetUp() override {
    grid = build_anchors(160, 160, default_anchor_levels());
    scenegen::SceneConfig sc = scenegen::SceneConfig::clean();
    sc.width = sc.height = 160;
    sc.max_tiles = 2;
    tiles = scenegen::annotate(scenegen::sample_scene(2, sc), default_catalog());
    target = encode(tiles, grid, default_catalog());
  }
  AnchorGrid grid;
  std::vector<scenegen::TileAnnotation> tiles;
  TargetTensor target;
};

TEST_F(DetectorLoss, PerfectPredictionsCostAlmostNothing) {
  const LossBreakdown l = detector_loss(perfect_predictions(target), target, LossConfig{});
  EXPECT_LT(l.total(), 1e-9);
  EXPECT_GT(target.num_positive(), 0u);
}

TEST_F(DetectorLoss, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const LossConfig cfg;
  for (int t = 0; t < 5; ++t) {
    PredictionTensor pred(grid.size(), default_catalog().size(), 48);
    for (double& v : pred.data()) v = rng.normal(0, 1.5);
    PredictionTensor grad(grid.size(), default_catalog().size(), 48);
    detector_loss(pred, target, cfg, false, &grad);
    for (int k = 0; k < 200; ++k) {
      const std::size_t i = rng.below(pred.data().size());
      PredictionTensor p = pred, m = pred;
      p.data()[i] += 1e-5;
      m.data()[i] -= 1e-5;
      const double fd =
          (detector_loss(p, target, cfg, false).total() - detector_loss(m, target, cfg, false).total()) / 2e-5;
      EXPECT_LE(rel_err(grad.data()[i], fd), 1e-5) << i;
    }
  }
}

TEST_F(DetectorLoss, HardNegativesBalancePositives) {
  Rng rng(6);
  PredictionTensor pred(grid.size(), default_catalog().size(), 48);
  for (double& v : pred.data()) v = rng.normal(0, 1.5);
  const auto hard = hard_negatives(pred, target, LossConfig{});
  std::size_t n = 0;
  double weakest_hard = 1e300, strongest_other = 0.0;
  for (std::size_t a = 0; a < hard.size(); ++a) {
    if (!target.negative_candidate[a]) {
      EXPECT_FALSE(hard[a]);
      continue;
    }
    const double l = softmax_focal_loss(pred.class_logits(a), 0, LossConfig{});
    if (hard[a]) {
      ++n;
      weakest_hard = std::min(weakest_hard, l);
    } else {
      strongest_other = std::max(strongest_other, l);
    }
  }
  EXPECT_EQ(n, target.num_positive());
  EXPECT_GE(weakest_hard, strongest_other);
}

}  // namespace
}  // namespace tilesense
