#pragma once

// Anchor grid, target encoding and decoding for the three detector heads
// (class, orientation bin, box offsets).

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tilesense/catalog.hpp"
#include "tilesense/detection.hpp"
#include "tilesense/geometry.hpp"
#include "tilesense/scenegen.hpp"

namespace tilesense {

struct AnchorLevel {
  int stride = 16;
  double side = 20.0;  ///< square anchor side, pixels
};

/// Strides {16, 32, 64}, side 1.25 x stride.
std::vector<AnchorLevel> default_anchor_levels();
std::vector<AnchorLevel> anchor_levels_for(std::span<const int> strides, double side_factor = 1.25);

struct Anchor {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  AxisBox box() const { return AxisBox::from_center(cx, cy, w, h); }
};

/// Anchors ordered level-major, then row-major; anchor (r, c) of a level sits
/// at ((c + 0.5) * stride, (r + 0.5) * stride).
struct AnchorGrid {
  int width = 0;
  int height = 0;
  std::vector<AnchorLevel> levels;
  std::vector<Anchor> anchors;

  std::size_t size() const { return anchors.size(); }
};

/// Throws std::invalid_argument for empty levels or non-positive strides/sizes.
AnchorGrid build_anchors(int width, int height, std::span<const AnchorLevel> levels);

/// Box regression offsets relative to an anchor.
struct BoxOffsets {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;
};

/// Box as (center, size). Encoding uses the tile's pose center with the size
/// of its axis-aligned bounding box.
struct CenterBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

/// dx = (gx - ax) / aw, dy = (gy - ay) / ah, dw = ln(gw / aw), dh = ln(gh / ah).
BoxOffsets offsets_of(const Anchor& anchor, const CenterBox& box);
CenterBox apply_offsets(const Anchor& anchor, const BoxOffsets& off);

struct EncodeConfig {
  double match_iou_pos = 0.5;
  double match_iou_neg = 0.4;
  std::uint64_t negative_seed = 0;  ///< seed of the static 1:1 negative sample
  OrientationBins bins;
};

/// Per-anchor targets. Class 0 is background, spec index + 1 otherwise.
struct TargetTensor {
  std::size_t classes = 0;  ///< foreground classes
  int bins = 48;
  std::vector<int> class_target;
  std::vector<int> orientation_target;  ///< -1 unless positive
  std::vector<BoxOffsets> offset_target;
  std::vector<std::uint8_t> positive;
  std::vector<std::uint8_t> negative_candidate;  ///< max IoU < match_iou_neg
  std::vector<std::uint8_t> sampled_negative;
  std::vector<int> matched_gt;  ///< -1 unless positive

  std::size_t size() const { return class_target.size(); }
  std::size_t num_positive() const;
  std::size_t num_sampled_negative() const;
};

/// Axis IoU matching against each tile's aabb, with best-anchor fallback per
/// tile. Throws std::invalid_argument for a tile with a zero-area box or an
/// unknown spec.
TargetTensor encode(std::span<const scenegen::TileAnnotation> tiles, const AnchorGrid& grid, const Catalog& catalog,
                    const EncodeConfig& config = {});

/// Dense head outputs, one row per anchor: classes + 1 class logits, then
/// bins orientation logits, then 4 offsets.
class PredictionTensor {
 public:
  PredictionTensor() = default;
  PredictionTensor(std::size_t anchors, std::size_t classes, std::size_t bins);

  std::size_t anchors() const { return anchors_; }
  std::size_t classes() const { return classes_; }
  std::size_t bins() const { return bins_; }
  std::size_t row_size() const { return classes_ + 1 + bins_ + 4; }

  std::span<double> class_logits(std::size_t a) { return {row(a), classes_ + 1}; }
  std::span<const double> class_logits(std::size_t a) const { return {row(a), classes_ + 1}; }
  std::span<double> orientation_logits(std::size_t a) { return {row(a) + classes_ + 1, bins_}; }
  std::span<const double> orientation_logits(std::size_t a) const { return {row(a) + classes_ + 1, bins_}; }
  std::span<double> offsets(std::size_t a) { return {row(a) + classes_ + 1 + bins_, 4}; }
  std::span<const double> offsets(std::size_t a) const { return {row(a) + classes_ + 1 + bins_, 4}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const PredictionTensor&, const PredictionTensor&) = default;

 private:
  double* row(std::size_t a) { return data_.data() + a * row_size(); }
  const double* row(std::size_t a) const { return data_.data() + a * row_size(); }

  std::size_t anchors_ = 0;
  std::size_t classes_ = 0;
  std::size_t bins_ = 0;
  std::vector<double> data_;
};

/// One-hot class and bin logits (`confidence` for the target, 0 elsewhere)
/// and exact offsets; non-positive anchors score as background.
PredictionTensor perfect_predictions(const TargetTensor& target, double confidence = 30.0);

struct DecodeConfig {
  double score_thresh = 0.5;
  double nms_iou = 0.45;
  std::size_t max_out = 64;
  bool rotated_nms = true;
};

/// Throws std::invalid_argument unless the tensor matches the grid, the
/// catalog's class count and the bin count.
void check_shape(const PredictionTensor& pred, const AnchorGrid& grid, const Catalog& catalog,
                 const OrientationBins& bins);

/// Scored candidates before NMS, one per anchor whose best foreground class
/// probability reaches the threshold.
std::vector<Detection> decode_candidates(const PredictionTensor& pred, const AnchorGrid& grid,
                                         const Catalog& catalog, const DecodeConfig& config = {},
                                         const OrientationBins& bins = OrientationBins{});

/// decode_candidates followed by per-class NMS; sorted by score.
std::vector<Detection> decode(const PredictionTensor& pred, const AnchorGrid& grid, const Catalog& catalog,
                              const DecodeConfig& config = {}, const OrientationBins& bins = OrientationBins{});

/// External tensor format: a one-line JSON header
///   {"anchors", "classes", "bins", "layout": "class|orientation|offsets", "dtype": "f32le"}
/// then anchor-major little-endian float32 values. "classes" counts
/// foreground classes (each row has classes + 1 class logits).
///
/// Concatenated form: the header carries "offset", the byte position of the
/// blob in the same file. Separate form: header file without "offset" and the
/// blob in a sibling file with extension ".bin".
void save_predictions(const PredictionTensor& pred, const std::filesystem::path& path, bool concatenated = true);

/// Throws std::runtime_error on I/O failure, truncated blobs or a malformed
/// header.
PredictionTensor load_predictions(const std::filesystem::path& path);

}  // namespace tilesense
