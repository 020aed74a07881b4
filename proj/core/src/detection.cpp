#include "tilesense/detection.hpp"

#include <algorithm>

#include "tilesense/json_util.hpp"

namespace tilesense {

void sort_detections(std::vector<Detection>& dets) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.source < b.source;
  });
}

std::vector<Detection> nms(std::vector<Detection> candidates, double iou_threshold, bool rotated,
                           std::size_t max_out) {
  sort_detections(candidates);
  std::vector<Detection> kept;
  std::vector<AxisBox> kept_bounds;
  for (Detection& cand : candidates) {
    if (max_out && kept.size() >= max_out) break;
    const AxisBox cb = bounding_box(cand.vertices);
    bool suppressed = false;
    for (std::size_t i = 0; i < kept.size() && !suppressed; ++i) {
      const Detection& k = kept[i];
      if (k.spec_id != cand.spec_id) continue;
      double iou = 0.0;
      if (rotated) {
        const AxisBox& kb = kept_bounds[i];
        if (cb.x1 < kb.x0 || kb.x1 < cb.x0 || cb.y1 < kb.y0 || kb.y1 < cb.y0) continue;
        iou = rotated_iou(cand.vertices, k.vertices);
      } else {
        iou = axis_iou(cand.box, k.box);
      }
      suppressed = iou > iou_threshold;
    }
    if (!suppressed) {
      kept_bounds.push_back(cb);
      kept.push_back(std::move(cand));
    }
  }
  return kept;
}

nlohmann::json polygon_to_json(const Polygon& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (Point2 v : p.vertices) arr.push_back({v.x, v.y});
  return arr;
}

Polygon polygon_from_json(const nlohmann::json& j, std::string_view path) {
  if (!j.is_array()) throw SchemaError(std::string(path), "expected an array of [x, y]");
  Polygon p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& v = j[i];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw SchemaError(json_util::index(path, i), "expected [x, y]");
    }
    p.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
  }
  return p;
}

nlohmann::json to_json(const Detection& det) {
  return {
      {"shape", std::string(to_string(det.shape))},
      {"spec_id", det.spec_id},
      {"score", det.score},
      {"cx", det.pose.cx},
      {"cy", det.pose.cy},
      {"theta_deg", det.pose.theta},
      {"orientation_bin", det.orientation_bin},
      {"vertices", polygon_to_json(det.vertices)},
  };
}

nlohmann::json detections_to_json(std::span<const Detection> dets) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Detection& d : dets) arr.push_back(to_json(d));
  return {{"detections", std::move(arr)}};
}

std::vector<Detection> detections_from_json(const nlohmann::json& j, const Catalog& catalog) {
  namespace ju = json_util;
  ju::require_object(j, "");
  const auto& arr = ju::array(j, "", "detections");
  std::vector<Detection> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& e = arr[i];
    const std::string path = ju::index("detections", i);
    ju::require_object(e, path);
    Detection d;
    const std::string shape = ju::string(e, path, "shape");
    try {
      d.shape = shape_from_string(shape);
    } catch (const std::invalid_argument&) {
      throw SchemaError(ju::join(path, "shape"), "unknown shape '" + shape + "'");
    }
    d.spec_id = e.contains("spec_id") && e["spec_id"].is_string() ? e["spec_id"].get<std::string>() : "";
    d.score = ju::number_or(e, path, "score", 1.0);
    double w = 1.0;
    double h = 1.0;
    if (!d.spec_id.empty() && catalog.contains(d.spec_id)) {
      w = catalog.at(d.spec_id).w;
      h = catalog.at(d.spec_id).h;
    }
    d.pose = {ju::number(e, path, "cx"), ju::number(e, path, "cy"), w, h,
              normalize_deg(ju::number_or(e, path, "theta_deg", 0.0))};
    d.orientation_bin = static_cast<int>(ju::number_or(e, path, "orientation_bin", 0));
    if (e.contains("vertices")) {
      d.vertices = polygon_from_json(e["vertices"], ju::join(path, "vertices"));
    } else {
      d.vertices = polygon_of(d.shape, d.pose);
    }
    d.box = bounding_box(d.vertices);
    d.source = i;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace tilesense
