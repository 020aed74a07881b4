#pragma once

// Focal classification/orientation losses and smooth-L1 box regression, with
// analytic gradients with respect to the prediction tensor.

#include <cstdint>
#include <span>
#include <vector>

#include "tilesense/encoding.hpp"

namespace tilesense {

struct LossConfig {
  double alpha = 0.25;
  double gamma = 2.0;
  double regression_weight = 1.0;

  /// Throws std::invalid_argument unless alpha in (0, 1], gamma >= 0 and the
  /// weight is non-negative. alpha = 1 is allowed so the loss reduces to
  /// cross-entropy.
  void validate() const;
};

/// FL(p) = -alpha (1 - p)^gamma ln p. Throws std::invalid_argument for p
/// outside (0, 1].
double focal_loss(double p_t, const LossConfig& cfg);

/// Focal loss of softmax(logits)[target]. When `grad` is non-empty it
/// receives d loss / d logits (overwritten, not accumulated).
double softmax_focal_loss(std::span<const double> logits, std::size_t target, const LossConfig& cfg,
                          std::span<double> grad = {});

/// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
double smooth_l1(double x);
double smooth_l1_grad(double x);

/// The hardest negative candidates by classification loss, as many as there
/// are positives (fewer when candidates run out). Ties go to the lower index.
std::vector<std::uint8_t> hard_negatives(const PredictionTensor& pred, const TargetTensor& target,
                                         const LossConfig& cfg);

/// Mean focal loss over positives and `negatives`. Gradients accumulate into
/// `grad` when given.
double classification_loss(const PredictionTensor& pred, const TargetTensor& target,
                           std::span<const std::uint8_t> negatives, const LossConfig& cfg,
                           PredictionTensor* grad = nullptr);

/// Mean focal loss over the orientation bins of positive anchors.
double orientation_loss(const PredictionTensor& pred, const TargetTensor& target, const LossConfig& cfg,
                        PredictionTensor* grad = nullptr);

/// regression_weight x sum of smooth-L1 over positive offsets / #positives.
double regression_loss(const PredictionTensor& pred, const TargetTensor& target, const LossConfig& cfg,
                       PredictionTensor* grad = nullptr);

struct LossBreakdown {
  double classification = 0.0;
  double orientation = 0.0;
  double regression = 0.0;
  double total() const { return classification + orientation + regression; }
};

/// All three heads. With `hard_negative_mining` the negatives are picked by
/// hard_negatives(), otherwise the target's static sample is used.
LossBreakdown detector_loss(const PredictionTensor& pred, const TargetTensor& target, const LossConfig& cfg,
                            bool hard_negative_mining = true, PredictionTensor* grad = nullptr);

}  // namespace tilesense
