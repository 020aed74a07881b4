#include "tilesense/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tilesense {

void LossConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("loss.alpha must be in (0, 1]");
  if (!(gamma >= 0.0)) throw std::invalid_argument("loss.gamma must be >= 0");
  if (!(regression_weight >= 0.0)) throw std::invalid_argument("loss.regression_weight must be >= 0");
}

double focal_loss(double p_t, const LossConfig& cfg) {
  if (!(p_t > 0.0 && p_t <= 1.0)) throw std::invalid_argument("focal_loss: p_t must be in (0, 1]");
  if (p_t == 1.0) return 0.0;
  return -cfg.alpha * std::pow(1.0 - p_t, cfg.gamma) * std::log(p_t);
}

double softmax_focal_loss(std::span<const double> logits, std::size_t target, const LossConfig& cfg,
                          std::span<double> grad) {
  if (target >= logits.size()) throw std::out_of_range("softmax_focal_loss: target out of range");
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double z : logits) denom += std::exp(z - zmax);
  const double log_p = logits[target] - zmax - std::log(denom);
  const double p = std::exp(log_p);
  // 1 - p summed from the other classes keeps precision when p is near 1.
  double q = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (j != target) q += std::exp(logits[j] - zmax) / denom;
  }
  const double loss = -cfg.alpha * std::pow(q, cfg.gamma) * log_p;

  if (!grad.empty()) {
    // dL/dz_j = g * (delta_tj - p_j) with g = p * dL/dp.
    double g = -cfg.alpha * std::pow(q, cfg.gamma);
    if (cfg.gamma != 0.0 && q > 0.0) g += cfg.alpha * cfg.gamma * std::pow(q, cfg.gamma - 1.0) * p * log_p;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      const double pj = std::exp(logits[j] - zmax) / denom;
      grad[j] = g * ((j == target ? 1.0 : 0.0) - pj);
    }
  }
  return loss;
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

std::vector<std::uint8_t> hard_negatives(const PredictionTensor& pred, const TargetTensor& target,
                                         const LossConfig& cfg) {
  std::vector<std::pair<double, std::size_t>> losses;
  for (std::size_t a = 0; a < target.size(); ++a) {
    if (target.negative_candidate[a]) losses.emplace_back(softmax_focal_loss(pred.class_logits(a), 0, cfg), a);
  }
  const std::size_t want = std::min(target.num_positive(), losses.size());
  std::partial_sort(losses.begin(), losses.begin() + static_cast<std::ptrdiff_t>(want), losses.end(),
                    [](const auto& x, const auto& y) { return x.first > y.first || (x.first == y.first && x.second < y.second); });
  std::vector<std::uint8_t> mask(target.size(), 0);
  for (std::size_t i = 0; i < want; ++i) mask[losses[i].second] = 1;
  return mask;
}

double classification_loss(const PredictionTensor& pred, const TargetTensor& target,
                           std::span<const std::uint8_t> negatives, const LossConfig& cfg, PredictionTensor* grad) {
  std::size_t m = 0;
  for (std::size_t a = 0; a < target.size(); ++a) m += (target.positive[a] || negatives[a]) ? 1 : 0;
  if (m == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(m);
  double total = 0.0;
  std::vector<double> g(pred.classes() + 1);
  for (std::size_t a = 0; a < target.size(); ++a) {
    if (!target.positive[a] && !negatives[a]) continue;
    const auto t = static_cast<std::size_t>(target.positive[a] ? target.class_target[a] : 0);
    total += softmax_focal_loss(pred.class_logits(a), t, cfg, grad ? std::span<double>(g) : std::span<double>());
    if (grad) {
      auto out = grad->class_logits(a);
      for (std::size_t j = 0; j < g.size(); ++j) out[j] += g[j] * inv;
    }
  }
  return total * inv;
}

double orientation_loss(const PredictionTensor& pred, const TargetTensor& target, const LossConfig& cfg,
                        PredictionTensor* grad) {
  const std::size_t npos = target.num_positive();
  if (npos == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(npos);
  double total = 0.0;
  std::vector<double> g(pred.bins());
  for (std::size_t a = 0; a < target.size(); ++a) {
    if (!target.positive[a]) continue;
    const auto t = static_cast<std::size_t>(target.orientation_target[a]);
    total += softmax_focal_loss(pred.orientation_logits(a), t, cfg, grad ? std::span<double>(g) : std::span<double>());
    if (grad) {
      auto out = grad->orientation_logits(a);
      for (std::size_t j = 0; j < g.size(); ++j) out[j] += g[j] * inv;
    }
  }
  return total * inv;
}

double regression_loss(const PredictionTensor& pred, const TargetTensor& target, const LossConfig& cfg,
                       PredictionTensor* grad) {
  const std::size_t npos = target.num_positive();
  if (npos == 0) return 0.0;
  const double scale = cfg.regression_weight / static_cast<double>(npos);
  double total = 0.0;
  for (std::size_t a = 0; a < target.size(); ++a) {
    if (!target.positive[a]) continue;
    const BoxOffsets& o = target.offset_target[a];
    const double want[4] = {o.dx, o.dy, o.dw, o.dh};
    const auto got = pred.offsets(a);
    for (int k = 0; k < 4; ++k) {
      const double e = got[k] - want[k];
      total += smooth_l1(e);
      if (grad) grad->offsets(a)[k] += scale * smooth_l1_grad(e);
    }
  }
  return total * scale;
}

LossBreakdown detector_loss(const PredictionTensor& pred, const TargetTensor& target, const LossConfig& cfg,
                            bool hard_negative_mining, PredictionTensor* grad) {
  if (pred.anchors() != target.size() || pred.classes() != target.classes ||
      pred.bins() != static_cast<std::size_t>(target.bins)) {
    throw std::invalid_argument("detector_loss: prediction and target shapes differ");
  }
  if (grad && (grad->anchors() != pred.anchors() || grad->row_size() != pred.row_size())) {
    throw std::invalid_argument("detector_loss: gradient tensor shape differs");
  }
  const std::vector<std::uint8_t> negatives =
      hard_negative_mining ? hard_negatives(pred, target, cfg) : target.sampled_negative;
  LossBreakdown out;
  out.classification = classification_loss(pred, target, negatives, cfg, grad);
  out.orientation = orientation_loss(pred, target, cfg, grad);
  out.regression = regression_loss(pred, target, cfg, grad);
  return out;
}

}  // namespace tilesense
