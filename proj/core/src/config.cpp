#include "tilesense/config.hpp"

#include <fstream>
#include <stdexcept>

#include "tilesense/json_util.hpp"

namespace tilesense {

namespace ju = json_util;

namespace {

const nlohmann::json* section(const nlohmann::json& j, const char* key, std::initializer_list<std::string_view> allowed) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  ju::require_object(*it, key);
  ju::reject_unknown(*it, key, allowed);
  return &*it;
}

int int_or(const nlohmann::json& j, std::string_view path, std::string_view key, int dflt) {
  if (!j.contains(key)) return dflt;
  return static_cast<int>(ju::integer(j, path, key));
}

std::uint64_t seed_or(const nlohmann::json& j, std::string_view path, std::string_view key, std::uint64_t dflt) {
  if (!j.contains(key)) return dflt;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw SchemaError(ju::join(path, key), "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw SchemaError(field, what);
}

}  // namespace

AnchorGrid PipelineConfig::anchor_grid() const {
  const auto levels = anchor_levels();
  return build_anchors(width, height, levels);
}

void PipelineConfig::validate() const {
  require(width >= 16 && width <= 4096, "image_size.width", "must be in [16, 4096]");
  require(height >= 16 && height <= 4096, "image_size.height", "must be in [16, 4096]");
  require(!strides.empty(), "anchors.strides", "must not be empty");
  for (int s : strides) require(s > 0, "anchors.strides", "entries must be positive");
  require(anchor_side_factor > 0.0, "anchors.side_factor", "must be > 0");
  require(loss.alpha > 0.0 && loss.alpha <= 1.0, "loss.alpha", "must be in (0, 1]");
  require(loss.gamma >= 0.0, "loss.gamma", "must be >= 0");
  require(loss.regression_weight >= 0.0, "loss.regression_weight", "must be >= 0");
  require(decode.score_thresh > 0.0 && decode.score_thresh <= 1.0, "decode.score_thresh", "must be in (0, 1]");
  require(decode.nms_iou > 0.0 && decode.nms_iou <= 1.0, "decode.nms_iou", "must be in (0, 1]");
  require(decode.max_out >= 1, "decode.max_out", "must be >= 1");
  try {
    detect.segment.validate(catalog);
  } catch (const std::invalid_argument& e) {
    throw SchemaError("segment", e.what());
  }
  require(detect.fit.min_overlap > 0.0 && detect.fit.min_overlap <= 1.0, "segment.min_overlap", "must be in (0, 1]");
  require(compose.pos_tol > 0.0, "compose.pos_tol", "must be > 0");
  require(compose.theta_tol > 0.0, "compose.theta_tol", "must be > 0");
  require(match.tau_vertex > 0.0, "match.tau_vertex", "must be > 0");
  require(bench.iterations >= 1, "bench.iterations", "must be >= 1");
  require(bench.warmup >= 5, "bench.warmup", "must be >= 5");
  require(bench.images >= 1, "bench.images", "must be >= 1");
}

PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ju::require_object(j, "");
  ju::reject_unknown(j, "", {"version", "catalog", "image_size", "anchors", "loss", "decode", "segment", "compose",
                             "match", "seeds", "bench"});
  const long long version = ju::integer(j, "", "version");
  if (version != PipelineConfig::kVersion) throw SchemaError("version", "unsupported version " + std::to_string(version));

  PipelineConfig c;
  if (j.contains("catalog") && !j["catalog"].is_null()) {
    std::filesystem::path p = ju::string(j, "", "catalog");
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.catalog_path = p.string();
    try {
      c.catalog = load_catalog(c.catalog_path);
    } catch (const std::exception& e) {
      throw SchemaError("catalog", e.what());
    }
  }
  if (const auto* s = section(j, "image_size", {"width", "height"})) {
    c.width = int_or(*s, "image_size", "width", c.width);
    c.height = int_or(*s, "image_size", "height", c.height);
  }
  if (const auto* s = section(j, "anchors", {"strides", "side_factor"})) {
    if (s->contains("strides")) {
      c.strides.clear();
      for (const auto& v : ju::array(*s, "anchors", "strides")) {
        if (!v.is_number_integer()) throw SchemaError("anchors.strides", "expected integers");
        c.strides.push_back(v.get<int>());
      }
    }
    c.anchor_side_factor = ju::number_or(*s, "anchors", "side_factor", c.anchor_side_factor);
  }
  if (const auto* s = section(j, "loss", {"alpha", "gamma", "regression_weight"})) {
    c.loss.alpha = ju::number_or(*s, "loss", "alpha", c.loss.alpha);
    c.loss.gamma = ju::number_or(*s, "loss", "gamma", c.loss.gamma);
    c.loss.regression_weight = ju::number_or(*s, "loss", "regression_weight", c.loss.regression_weight);
  }
  if (const auto* s = section(j, "decode", {"score_thresh", "nms_iou", "max_out", "rotated_nms"})) {
    c.decode.score_thresh = ju::number_or(*s, "decode", "score_thresh", c.decode.score_thresh);
    c.decode.nms_iou = ju::number_or(*s, "decode", "nms_iou", c.decode.nms_iou);
    const int max_out = int_or(*s, "decode", "max_out", static_cast<int>(c.decode.max_out));
    if (max_out < 1) throw SchemaError("decode.max_out", "must be >= 1");
    c.decode.max_out = static_cast<std::size_t>(max_out);
    c.decode.rotated_nms = ju::boolean_or(*s, "decode", "rotated_nms", c.decode.rotated_nms);
  }
  c.detect.nms_iou = c.decode.nms_iou;
  c.detect.rotated_nms = c.decode.rotated_nms;
  c.detect.max_out = c.decode.max_out;
  if (const auto* s = section(j, "segment", {"color_tolerance", "min_region_area", "erosion_radius",
                                             "smoothing_radius", "normalize_photometrics", "min_overlap"})) {
    auto& sp = c.detect.segment;
    sp.color_tolerance = ju::number_or(*s, "segment", "color_tolerance", sp.color_tolerance);
    sp.min_region_area = int_or(*s, "segment", "min_region_area", sp.min_region_area);
    sp.erosion_radius = int_or(*s, "segment", "erosion_radius", sp.erosion_radius);
    sp.smoothing_radius = int_or(*s, "segment", "smoothing_radius", sp.smoothing_radius);
    sp.normalize_photometrics = ju::boolean_or(*s, "segment", "normalize_photometrics", sp.normalize_photometrics);
    c.detect.fit.min_overlap = ju::number_or(*s, "segment", "min_overlap", c.detect.fit.min_overlap);
  }
  if (const auto* s = section(j, "compose", {"pos_tol", "theta_tol"})) {
    c.compose.pos_tol = ju::number_or(*s, "compose", "pos_tol", c.compose.pos_tol);
    c.compose.theta_tol = ju::number_or(*s, "compose", "theta_tol", c.compose.theta_tol);
  }
  if (const auto* s = section(j, "match", {"tau_vertex", "require_class", "hungarian"})) {
    c.match.tau_vertex = ju::number_or(*s, "match", "tau_vertex", c.match.tau_vertex);
    c.match.require_class = ju::boolean_or(*s, "match", "require_class", c.match.require_class);
    c.match.hungarian = ju::boolean_or(*s, "match", "hungarian", c.match.hungarian);
  }
  if (const auto* s = section(j, "seeds", {"scene", "negative_sampling"})) {
    c.scene_seed = seed_or(*s, "seeds", "scene", c.scene_seed);
    c.negative_seed = seed_or(*s, "seeds", "negative_sampling", c.negative_seed);
  }
  if (const auto* s = section(j, "bench", {"iterations", "warmup", "images", "photometrics"})) {
    c.bench.iterations = int_or(*s, "bench", "iterations", c.bench.iterations);
    c.bench.warmup = int_or(*s, "bench", "warmup", c.bench.warmup);
    c.bench.images = int_or(*s, "bench", "images", c.bench.images);
    c.bench.photometrics = ju::boolean_or(*s, "bench", "photometrics", c.bench.photometrics);
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("$", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j, path.parent_path());
}

nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j{
      {"version", PipelineConfig::kVersion},
      {"image_size", {{"width", c.width}, {"height", c.height}}},
      {"anchors", {{"strides", c.strides}, {"side_factor", c.anchor_side_factor}}},
      {"loss", {{"alpha", c.loss.alpha}, {"gamma", c.loss.gamma}, {"regression_weight", c.loss.regression_weight}}},
      {"decode",
       {{"score_thresh", c.decode.score_thresh},
        {"nms_iou", c.decode.nms_iou},
        {"max_out", c.decode.max_out},
        {"rotated_nms", c.decode.rotated_nms}}},
      {"segment",
       {{"color_tolerance", c.detect.segment.color_tolerance},
        {"min_region_area", c.detect.segment.min_region_area},
        {"erosion_radius", c.detect.segment.erosion_radius},
        {"smoothing_radius", c.detect.segment.smoothing_radius},
        {"normalize_photometrics", c.detect.segment.normalize_photometrics},
        {"min_overlap", c.detect.fit.min_overlap}}},
      {"compose", {{"pos_tol", c.compose.pos_tol}, {"theta_tol", c.compose.theta_tol}}},
      {"match",
       {{"tau_vertex", c.match.tau_vertex}, {"require_class", c.match.require_class}, {"hungarian", c.match.hungarian}}},
      {"seeds", {{"scene", c.scene_seed}, {"negative_sampling", c.negative_seed}}},
      {"bench",
       {{"iterations", c.bench.iterations},
        {"warmup", c.bench.warmup},
        {"images", c.bench.images},
        {"photometrics", c.bench.photometrics}}},
  };
  j["catalog"] = c.catalog_path.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.catalog_path);
  return j;
}

}  // namespace tilesense
