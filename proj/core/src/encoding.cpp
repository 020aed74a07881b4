#include "tilesense/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tilesense/rng.hpp"

namespace tilesense {

std::vector<AnchorLevel> anchor_levels_for(std::span<const int> strides, double side_factor) {
  std::vector<AnchorLevel> out;
  for (int s : strides) out.push_back({s, side_factor * s});
  return out;
}

std::vector<AnchorLevel> default_anchor_levels() {
  constexpr int strides[] = {16, 32, 64};
  return anchor_levels_for(strides);
}

AnchorGrid build_anchors(int width, int height, std::span<const AnchorLevel> levels) {
  if (levels.empty()) throw std::invalid_argument("build_anchors: no levels");
  if (width <= 0 || height <= 0) throw std::invalid_argument("build_anchors: image size must be positive");
  AnchorGrid grid;
  grid.width = width;
  grid.height = height;
  grid.levels.assign(levels.begin(), levels.end());
  for (const AnchorLevel& lv : levels) {
    if (lv.stride <= 0 || !(lv.side > 0.0)) throw std::invalid_argument("build_anchors: stride and side must be positive");
    const int cols = (width + lv.stride - 1) / lv.stride;
    const int rows = (height + lv.stride - 1) / lv.stride;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        grid.anchors.push_back({(c + 0.5) * lv.stride, (r + 0.5) * lv.stride, lv.side, lv.side});
      }
    }
  }
  return grid;
}

BoxOffsets offsets_of(const Anchor& a, const CenterBox& g) {
  return {(g.cx - a.cx) / a.w, (g.cy - a.cy) / a.h, std::log(g.w / a.w), std::log(g.h / a.h)};
}

CenterBox apply_offsets(const Anchor& a, const BoxOffsets& o) {
  return {a.cx + o.dx * a.w, a.cy + o.dy * a.h, a.w * std::exp(o.dw), a.h * std::exp(o.dh)};
}

std::size_t TargetTensor::num_positive() const {
  return static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));
}

std::size_t TargetTensor::num_sampled_negative() const {
  return static_cast<std::size_t>(std::count(sampled_negative.begin(), sampled_negative.end(), 1));
}

TargetTensor encode(std::span<const scenegen::TileAnnotation> tiles, const AnchorGrid& grid, const Catalog& catalog,
                    const EncodeConfig& config) {
  const std::size_t n = grid.size();
  TargetTensor t;
  t.classes = catalog.size();
  t.bins = config.bins.count();
  t.class_target.assign(n, 0);
  t.orientation_target.assign(n, -1);
  t.offset_target.assign(n, {});
  t.positive.assign(n, 0);
  t.negative_candidate.assign(n, 0);
  t.sampled_negative.assign(n, 0);
  t.matched_gt.assign(n, -1);

  std::vector<int> cls(tiles.size());
  for (std::size_t g = 0; g < tiles.size(); ++g) {
    if (!(tiles[g].aabb.area() > 0.0)) {
      throw std::invalid_argument("encode: tile " + std::to_string(g) + " has a zero-area box");
    }
    cls[g] = static_cast<int>(catalog.index_of(tiles[g].spec_id)) + 1;
  }

  std::vector<double> best_iou(n, 0.0);
  std::vector<int> best_gt(n, -1);
  std::vector<std::size_t> gt_best_anchor(tiles.size(), 0);
  std::vector<double> gt_best_iou(tiles.size(), -1.0);
  std::vector<std::vector<double>> ious(tiles.size());
  for (std::size_t g = 0; g < tiles.size(); ++g) {
    ious[g].resize(n);
    for (std::size_t a = 0; a < n; ++a) {
      const double iou = axis_iou(grid.anchors[a].box(), tiles[g].aabb);
      ious[g][a] = iou;
      if (iou > best_iou[a]) {
        best_iou[a] = iou;
        best_gt[a] = static_cast<int>(g);
      }
      if (iou > gt_best_iou[g]) {
        gt_best_iou[g] = iou;
        gt_best_anchor[g] = a;
      }
    }
  }

  for (std::size_t a = 0; a < n; ++a) {
    if (best_iou[a] >= config.match_iou_pos) {
      t.positive[a] = 1;
      t.matched_gt[a] = best_gt[a];
    } else if (best_iou[a] < config.match_iou_neg) {
      t.negative_candidate[a] = 1;
    }
  }

  // Each tile claims its best anchor; a tile whose best anchor is already
  // claimed by another tile falls back to its next best free anchor.
  std::vector<std::uint8_t> claimed(n, 0);
  for (std::size_t g = 0; g < tiles.size(); ++g) {
    std::size_t pick = gt_best_anchor[g];
    if (claimed[pick]) {
      double best = -1.0;
      for (std::size_t a = 0; a < n; ++a) {
        if (!claimed[a] && ious[g][a] > best) {
          best = ious[g][a];
          pick = a;
        }
      }
    }
    claimed[pick] = 1;
    t.positive[pick] = 1;
    t.negative_candidate[pick] = 0;
    t.matched_gt[pick] = static_cast<int>(g);
  }

  for (std::size_t a = 0; a < n; ++a) {
    if (!t.positive[a]) continue;
    const scenegen::TileAnnotation& tile = tiles[static_cast<std::size_t>(t.matched_gt[a])];
    t.class_target[a] = cls[static_cast<std::size_t>(t.matched_gt[a])];
    t.orientation_target[a] = tile.orientation_bin;
    t.offset_target[a] = offsets_of(grid.anchors[a], {tile.cx, tile.cy, tile.aabb.width(), tile.aabb.height()});
  }

  std::vector<std::size_t> candidates;
  for (std::size_t a = 0; a < n; ++a) {
    if (t.negative_candidate[a]) candidates.push_back(a);
  }
  const std::size_t want = std::min(t.num_positive(), candidates.size());
  Rng rng(config.negative_seed);
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + rng.below(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
    t.sampled_negative[candidates[i]] = 1;
  }
  return t;
}

PredictionTensor::PredictionTensor(std::size_t anchors, std::size_t classes, std::size_t bins)
    : anchors_(anchors), classes_(classes), bins_(bins), data_(anchors * (classes + 1 + bins + 4), 0.0) {}

PredictionTensor perfect_predictions(const TargetTensor& target, double confidence) {
  PredictionTensor p(target.size(), target.classes, static_cast<std::size_t>(target.bins));
  for (std::size_t a = 0; a < target.size(); ++a) {
    auto cl = p.class_logits(a);
    cl[static_cast<std::size_t>(target.class_target[a])] = confidence;
    if (target.positive[a]) {
      p.orientation_logits(a)[static_cast<std::size_t>(target.orientation_target[a])] = confidence;
      const BoxOffsets& o = target.offset_target[a];
      auto off = p.offsets(a);
      off[0] = o.dx;
      off[1] = o.dy;
      off[2] = o.dw;
      off[3] = o.dh;
    }
  }
  return p;
}

void check_shape(const PredictionTensor& pred, const AnchorGrid& grid, const Catalog& catalog,
                 const OrientationBins& bins) {
  if (pred.anchors() != grid.size()) {
    throw std::invalid_argument("prediction tensor has " + std::to_string(pred.anchors()) + " anchors, grid has " +
                                std::to_string(grid.size()));
  }
  if (pred.classes() != catalog.size()) {
    throw std::invalid_argument("prediction tensor has " + std::to_string(pred.classes()) + " classes, catalog has " +
                                std::to_string(catalog.size()));
  }
  if (pred.bins() != static_cast<std::size_t>(bins.count())) {
    throw std::invalid_argument("prediction tensor has " + std::to_string(pred.bins()) + " bins, expected " +
                                std::to_string(bins.count()));
  }
}

std::vector<Detection> decode_candidates(const PredictionTensor& pred, const AnchorGrid& grid,
                                         const Catalog& catalog, const DecodeConfig& config,
                                         const OrientationBins& bins) {
  check_shape(pred, grid, catalog, bins);
  std::vector<Detection> out;
  const std::size_t C = pred.classes();
  for (std::size_t a = 0; a < pred.anchors(); ++a) {
    const auto logits = pred.class_logits(a);
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    std::size_t best = 1;
    for (std::size_t c = 0; c <= C; ++c) {
      denom += std::exp(logits[c] - zmax);
      if (c >= 1 && logits[c] > logits[best]) best = c;
    }
    const double score = std::exp(logits[best] - zmax) / denom;
    if (!(score >= config.score_thresh) || score <= 0.0) continue;

    const auto ol = pred.orientation_logits(a);
    const int bin = static_cast<int>(std::max_element(ol.begin(), ol.end()) - ol.begin());
    const auto o = pred.offsets(a);
    const CenterBox box = apply_offsets(grid.anchors[a], {o[0], o[1], o[2], o[3]});
    if (!std::isfinite(box.cx) || !std::isfinite(box.cy) || !std::isfinite(box.w) || !std::isfinite(box.h)) continue;

    const TileSpec& spec = catalog[best - 1];
    Detection d;
    d.shape = spec.shape;
    d.spec_id = spec.id;
    d.score = score;
    d.orientation_bin = bin;
    d.pose = {box.cx, box.cy, spec.w, spec.h, theta_of(bin, bins)};
    d.vertices = polygon_of(spec.shape, d.pose);
    d.box = AxisBox::from_center(box.cx, box.cy, box.w, box.h);
    d.source = a;
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> decode(const PredictionTensor& pred, const AnchorGrid& grid, const Catalog& catalog,
                              const DecodeConfig& config, const OrientationBins& bins) {
  return nms(decode_candidates(pred, grid, catalog, config, bins), config.nms_iou, config.rotated_nms, config.max_out);
}

}  // namespace tilesense
