#pragma once

// Classical reference detector: color segmentation of tile fills followed by
// a pose fit of the catalog model against each region's mask.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "tilesense/catalog.hpp"
#include "tilesense/detection.hpp"
#include "tilesense/geometry.hpp"
#include "tilesense/image.hpp"

namespace tilesense {

/// Global brightness model: observed = 255 * (min(255, gain * c) / 255)^gamma.
struct ColorModel {
  double gain = 1.0;
  double gamma = 1.0;
  std::array<double, 3> background{double(kPlaymatColor[0]), double(kPlaymatColor[1]), double(kPlaymatColor[2])};

  std::array<double, 3> apply(const Rgb& c) const;
};

/// Background from the median of unsaturated pixels; gain tied to the
/// background, gamma chosen to best explain the saturated pixels with the
/// catalog colors.
ColorModel estimate_color_model(const Image& image, const Catalog& catalog);

struct SegmentParams {
  double color_tolerance = 40.0;  ///< max RGB distance to the matched prototype
  int min_region_area = 150;      ///< pixels
  int erosion_radius = 0;         ///< pixels removed from fill masks before labeling
  int smoothing_radius = 0;       ///< box filter radius applied before classification
  bool normalize_photometrics = true;

  /// Throws std::invalid_argument for negative sizes or a tolerance at or
  /// above half the catalog's minimum color distance.
  void validate(const Catalog& catalog) const;
};

/// Connected fill region of one spec.
struct Region {
  std::size_t spec_index = 0;
  std::string spec_id;
  int x0 = 0;  ///< mask bounds, [x0, x1) x [y0, y1)
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  std::size_t pixel_count = 0;
  Point2 centroid;  ///< pixel centers at (x + 0.5, y + 0.5)
  std::vector<std::uint8_t> mask;  ///< row-major over the bounds

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool at(int x, int y) const { return mask[static_cast<std::size_t>(y - y0) * width() + (x - x0)] != 0; }
};

/// Nearest-prototype pixel classification (background, fill and border of
/// each spec), 8-connected labeling of fill pixels, small-region rejection.
/// Regions are ordered by first pixel in raster order.
std::vector<Region> segment(const Image& image, const Catalog& catalog, const SegmentParams& params = {});

struct FitParams {
  double min_overlap = 0.6;
  bool estimate_scale = true;
  int refine_iterations = 24;
  int erosion_radius = 0;  ///< must match the segmentation setting
  OrientationBins bins;
};

/// Fits the region's spec model: scale from the mask area, coarse search over
/// the bins within one symmetry period, golden-section refinement over +-G/2.
/// Score is the IoU between mask and the model fill. Returns nullopt when the
/// best score is below min_overlap.
std::optional<Detection> fit_pose(const Region& region, const Catalog& catalog, const FitParams& params = {});

struct DetectParams {
  SegmentParams segment;
  FitParams fit;
  double nms_iou = 0.45;
  bool rotated_nms = true;
  std::size_t max_out = 64;
};

std::vector<Detection> detect(const Image& image, const Catalog& catalog, const DetectParams& params = {});

}  // namespace tilesense
