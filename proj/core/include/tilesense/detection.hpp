#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tilesense/catalog.hpp"
#include "tilesense/geometry.hpp"

namespace tilesense {

/// One detected tile.
struct Detection {
  ShapeClass shape = ShapeClass::square;
  std::string spec_id;
  double score = 0.0;       ///< (0, 1]
  OrientedBox pose;         ///< center, model size, theta
  int orientation_bin = 0;
  Polygon vertices;         ///< polygon_of(shape, pose)
  AxisBox box;              ///< decoded axis-aligned box (used by axis-aligned NMS)
  std::size_t source = 0;   ///< anchor or region index; ordering tiebreak
};

/// Greedy per-class NMS. Candidates are visited by descending score, then
/// ascending source; a candidate is dropped when its IoU with an already kept
/// detection of the same spec exceeds `iou_threshold`. Rotated mode compares
/// vertex polygons, axis mode compares `box`.
std::vector<Detection> nms(std::vector<Detection> candidates, double iou_threshold,
                           bool rotated = true, std::size_t max_out = 0);

/// Sort by descending score, ascending source.
void sort_detections(std::vector<Detection>& dets);

nlohmann::json to_json(const Detection& det);
nlohmann::json detections_to_json(std::span<const Detection> dets);

/// Parses {"detections": [...]}. Spec ids are resolved against `catalog` when
/// present there; vertices are taken as given.
std::vector<Detection> detections_from_json(const nlohmann::json& j, const Catalog& catalog);

nlohmann::json polygon_to_json(const Polygon& p);
Polygon polygon_from_json(const nlohmann::json& j, std::string_view path);

}  // namespace tilesense
