#include "tilesense/scenegen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <system_error>
#include <thread>

#include "tilesense/json_util.hpp"
#include "tilesense/rng.hpp"

namespace tilesense::scenegen {

namespace fs = std::filesystem;
namespace ju = json_util;

namespace {

double circumradius(const TileSpec& spec) {
  double r = 0.0;
  for (Point2 v : model_polygon(spec.shape, spec.w, spec.h).vertices) r = std::max(r, std::hypot(v.x, v.y));
  return r;
}

Photometrics sample_photometrics(Rng& rng, const PhotometricRanges& r, int width, int height) {
  Photometrics ph;
  ph.brightness_gain = rng.uniform(r.gain.lo, r.gain.hi);
  ph.gamma = rng.uniform(r.gamma.lo, r.gamma.hi);
  ph.noise_sigma = rng.uniform(r.noise_sigma.lo, r.noise_sigma.hi);
  if (rng.uniform() < r.shadow_probability) {
    Shadow s;
    s.cx = rng.uniform(0.0, width);
    s.cy = rng.uniform(0.0, height);
    s.rx = rng.uniform(60.0, 180.0);
    s.ry = rng.uniform(60.0, 180.0);
    s.angle_deg = rng.uniform(0.0, 180.0);
    s.strength = rng.uniform(r.shadow_strength.lo, r.shadow_strength.hi);
    ph.shadow = s;
  }
  return ph;
}

Similarity sample_jitter(Rng& rng, const JitterRanges& r, int width, int height) {
  Similarity j;
  j.scale = rng.uniform(r.scale.lo, r.scale.hi);
  j.rotation_deg = rng.uniform(r.rotation_deg.lo, r.rotation_deg.hi);
  j.tx = rng.uniform(-r.max_translation, r.max_translation);
  j.ty = rng.uniform(-r.max_translation, r.max_translation);
  j.origin = {width / 2.0, height / 2.0};
  return j;
}

bool in_bounds(const Polygon& p, int width, int height) {
  const AxisBox b = bounding_box(p);
  constexpr double margin = 1.0;
  return b.x0 >= margin && b.y0 >= margin && b.x1 <= width - margin && b.y1 <= height - margin;
}

struct Placed {
  Polygon poly;
  double area;
};

bool fits(const Polygon& poly, double area, const std::vector<Placed>& placed) {
  for (const Placed& p : placed) {
    if (intersection_area(poly, p.poly) > kMaxOverlapFraction * std::min(area, p.area)) return false;
  }
  return true;
}

std::string entry_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

SceneConfig SceneConfig::clean() {
  SceneConfig c;
  c.photometrics = PhotometricRanges::none();
  c.jitter = JitterRanges::none();
  return c;
}

Polygon tile_polygon(const SceneSpec& scene, const TilePose& tile, const Catalog& catalog) {
  const TileSpec& spec = catalog.at(tile.spec_id);
  OrientedBox pose = tile.pose;
  pose.w = spec.w;
  pose.h = spec.h;
  const Polygon p = polygon_of(spec.shape, pose);
  return scene.global_jitter.is_identity() ? p : scene.global_jitter.apply(p);
}

bool scene_is_valid(const SceneSpec& scene, const Catalog& catalog) {
  std::vector<Placed> placed;
  for (const TilePose& t : scene.tiles) {
    const Polygon p = tile_polygon(scene, t, catalog);
    if (!in_bounds(p, scene.width, scene.height)) return false;
    const double a = polygon_area(p);
    if (!fits(p, a, placed)) return false;
    placed.push_back({p, a});
  }
  return true;
}

SceneSpec sample_scene(std::uint64_t seed, const SceneConfig& config) {
  if (config.catalog.empty()) throw std::invalid_argument("sample_scene: empty catalog");
  if (config.max_tiles < 1) throw std::invalid_argument("sample_scene: max_tiles must be >= 1");

  Rng rng(seed);
  SceneSpec scene;
  scene.width = config.width;
  scene.height = config.height;
  scene.rng_seed = rng.next();
  scene.global_jitter = sample_jitter(rng, config.jitter, config.width, config.height);
  scene.photometrics = sample_photometrics(rng, config.photometrics, config.width, config.height);

  const int target = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(config.max_tiles)));
  std::vector<Placed> placed;
  std::vector<double> radii;
  for (int t = 0; t < target; ++t) {
    const TileSpec& spec = config.catalog[rng.below(config.catalog.size())];
    const double r = circumradius(spec);
    for (int attempt = 0; attempt < config.max_retries; ++attempt) {
      const double theta = rng.uniform(0.0, 360.0);
      Point2 c;
      if (!placed.empty() && rng.uniform() < config.snug_probability) {
        const std::size_t k = rng.below(placed.size());
        const Point2 anchor = scene.tiles[k].pose.center();
        const double dist = (r + radii[k]) * rng.uniform(0.45, 1.0);
        c = anchor + rotate({dist, 0.0}, rng.uniform(0.0, 360.0));
      } else {
        c = {rng.uniform(r, config.width - r), rng.uniform(r, config.height - r)};
      }
      TilePose tile{spec.id, {c.x, c.y, spec.w, spec.h, theta}};
      Polygon poly = tile_polygon(scene, tile, config.catalog);
      if (!in_bounds(poly, config.width, config.height)) continue;
      const double area = polygon_area(poly);
      if (!fits(poly, area, placed)) continue;
      placed.push_back({std::move(poly), area});
      radii.push_back(r);
      scene.tiles.push_back(std::move(tile));
      break;
    }
  }
  return scene;
}

SceneSpec sample_composition(const std::string& template_id, const CompositionJitter& jitter, std::uint64_t seed,
                             const compose::TemplateRegistry& registry, const SceneConfig& config,
                             const std::optional<std::vector<std::size_t>>& alternatives) {
  const compose::CompositionTemplate& tmpl = registry.at(template_id);
  Rng rng(seed);

  CompositionInfo info{template_id, {}};
  std::vector<const compose::PartSlot*> slots;
  for (std::size_t g = 0; g < tmpl.parts.size(); ++g) {
    const auto& group = tmpl.parts[g];
    std::size_t a = rng.below(group.alternatives.size());
    if (alternatives) {
      if (alternatives->size() != tmpl.parts.size() || (*alternatives)[g] >= group.alternatives.size()) {
        throw std::invalid_argument("sample_composition: bad alternative selection");
      }
      a = (*alternatives)[g];
    }
    info.alternatives.push_back(a);
    for (const auto& slot : group.alternatives[a]) slots.push_back(&slot);
  }

  SceneSpec scene;
  scene.width = config.width;
  scene.height = config.height;
  scene.rng_seed = rng.next();
  JitterRanges jr = config.jitter;
  jr.scale = {1.0, 1.0};
  scene.global_jitter = sample_jitter(rng, jr, config.width, config.height);
  scene.photometrics = sample_photometrics(rng, config.photometrics, config.width, config.height);
  scene.composition = info;

  Point2 mean{};
  for (const auto* s : slots) mean = mean + Point2{s->cx, s->cy};
  mean = mean * (1.0 / static_cast<double>(slots.size()));
  const Point2 center{config.width / 2.0, config.height / 2.0};

  auto realize = [&](double phi, Point2 offset) {
    std::vector<TilePose> tiles;
    for (const auto* s : slots) {
      const TileSpec& spec = registry.spec_for(*s);
      const Point2 c = center + offset + rotate(Point2{s->cx, s->cy} - mean, phi);
      tiles.push_back({spec.id, {c.x, c.y, spec.w, spec.h, normalize_deg(s->theta_deg + phi)}});
    }
    return tiles;
  };
  auto all_in_bounds = [&](const std::vector<TilePose>& tiles) {
    return std::all_of(tiles.begin(), tiles.end(), [&](const TilePose& t) {
      return in_bounds(tile_polygon(scene, t, config.catalog), scene.width, scene.height);
    });
  };

  std::vector<TilePose> base;
  for (int attempt = 0; attempt < config.max_retries && base.empty(); ++attempt) {
    const double phi = rng.uniform(0.0, 360.0);
    const Point2 off{rng.uniform(-60.0, 60.0), rng.uniform(-60.0, 60.0)};
    auto tiles = realize(phi, off);
    if (all_in_bounds(tiles)) base = std::move(tiles);
  }
  if (base.empty()) base = realize(0.0, {});

  std::vector<Placed> placed;
  const bool jittered = jitter.pos_sigma > 0.0 || jitter.theta_sigma > 0.0;
  for (const TilePose& nominal : base) {
    const int tries = jittered ? config.max_retries : 1;
    for (int attempt = 0; attempt < tries; ++attempt) {
      TilePose t = nominal;
      if (jittered) {
        t.pose.cx += rng.normal(0.0, jitter.pos_sigma);
        t.pose.cy += rng.normal(0.0, jitter.pos_sigma);
        t.pose.theta = normalize_deg(t.pose.theta + rng.normal(0.0, jitter.theta_sigma));
      }
      Polygon poly = tile_polygon(scene, t, config.catalog);
      if (!in_bounds(poly, scene.width, scene.height)) continue;
      const double area = polygon_area(poly);
      if (!fits(poly, area, placed)) continue;
      placed.push_back({std::move(poly), area});
      scene.tiles.push_back(std::move(t));
      break;
    }
  }
  return scene;
}

OrientedBox TileAnnotation::pose(const Catalog& catalog) const {
  const TileSpec& spec = catalog.at(spec_id);
  return {cx, cy, spec.w * scale, spec.h * scale, theta_deg};
}

std::vector<TileAnnotation> annotate(const SceneSpec& scene, const Catalog& catalog, const OrientationBins& bins) {
  std::vector<TileAnnotation> out;
  const Similarity& J = scene.global_jitter;
  for (const TilePose& t : scene.tiles) {
    const TileSpec& spec = catalog.at(t.spec_id);
    TileAnnotation a;
    a.spec_id = spec.id;
    a.shape = spec.shape;
    const Point2 c = J.apply(t.pose.center());
    a.cx = c.x;
    a.cy = c.y;
    a.scale = J.scale;
    a.theta_deg = canonical_theta(t.pose.theta + J.rotation_deg, spec.symmetry());
    a.orientation_bin = bin_of(a.theta_deg, bins);
    a.vertices = polygon_of(spec.shape, a.pose(catalog));
    a.aabb = bounding_box(a.vertices);
    out.push_back(std::move(a));
  }
  return out;
}

DatasetMode dataset_mode_from_string(std::string_view s) {
  if (s == "random") return DatasetMode::random;
  if (s == "compositions") return DatasetMode::compositions;
  if (s == "mixed") return DatasetMode::mixed;
  throw std::invalid_argument("unknown dataset mode: " + std::string(s));
}

std::string_view to_string(DatasetMode m) {
  switch (m) {
    case DatasetMode::random: return "random";
    case DatasetMode::compositions: return "compositions";
    case DatasetMode::mixed: return "mixed";
  }
  return "random";
}

std::size_t DatasetManifest::failures() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const ManifestEntry& e) { return !e.error.empty(); }));
}

DatasetManifest generate_dataset(std::size_t n, std::uint64_t seed, const fs::path& out_dir, DatasetMode mode,
                                 const DatasetOptions& options, const compose::TemplateRegistry& registry) {
  std::error_code ec;
  for (const char* sub : {"images", "annotations", "scenes"}) {
    fs::create_directories(out_dir / sub, ec);
    if (ec) throw std::runtime_error("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }

  DatasetManifest manifest;
  manifest.seed = seed;
  manifest.mode = std::string(to_string(mode));
  manifest.entries.resize(n);
  const std::vector<std::string> template_ids = registry.ids();

  auto job = [&](std::size_t i) {
    ManifestEntry& e = manifest.entries[i];
    const std::string name = entry_name(i);
    e.image_path = "images/" + name + ".png";
    e.annotation_path = "annotations/" + name + ".json";
    e.scene_path = "scenes/" + name + ".json";
    try {
      const std::uint64_t s = derive_seed(seed, i);
      Rng pick(s ^ 0xC0FFEEull);
      bool composition = mode == DatasetMode::compositions;
      if (mode == DatasetMode::mixed) composition = pick.uniform() < 0.5;
      SceneSpec scene;
      if (composition && !template_ids.empty()) {
        const std::string& id = template_ids[pick.below(template_ids.size())];
        scene = sample_composition(id, options.composition_jitter, s, registry, options.scene);
      } else {
        scene = sample_scene(s, options.scene);
      }
      const Catalog& catalog = options.scene.catalog;
      write_png(rasterize(scene, catalog), (out_dir / e.image_path).string());
      write_text(out_dir / e.annotation_path,
                 dump_stable(annotation_to_json(e.image_path, scene.width, scene.height, annotate(scene, catalog))));
      write_text(out_dir / e.scene_path, dump_stable(to_json(scene)));
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) job(i);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  write_text(out_dir / "manifest.json", dump_stable(to_json(manifest)));
  return manifest;
}

std::string dump_stable(const nlohmann::json& j) { return j.dump(1) + "\n"; }

nlohmann::json to_json(const SceneSpec& scene) {
  nlohmann::json tiles = nlohmann::json::array();
  for (const TilePose& t : scene.tiles) {
    tiles.push_back({{"spec_id", t.spec_id}, {"cx", t.pose.cx}, {"cy", t.pose.cy}, {"theta_deg", t.pose.theta}});
  }
  const Photometrics& ph = scene.photometrics;
  nlohmann::json shadow = nullptr;
  if (ph.shadow) {
    shadow = {{"cx", ph.shadow->cx}, {"cy", ph.shadow->cy}, {"rx", ph.shadow->rx},
              {"ry", ph.shadow->ry}, {"angle_deg", ph.shadow->angle_deg}, {"strength", ph.shadow->strength}};
  }
  nlohmann::json comp = nullptr;
  if (scene.composition) {
    comp = {{"template_id", scene.composition->template_id}, {"alternatives", scene.composition->alternatives}};
  }
  return {
      {"width", scene.width},
      {"height", scene.height},
      {"tiles", std::move(tiles)},
      {"photometrics",
       {{"brightness_gain", ph.brightness_gain}, {"gamma", ph.gamma}, {"noise_sigma", ph.noise_sigma},
        {"shadow", std::move(shadow)}}},
      {"global_jitter",
       {{"scale", scene.global_jitter.scale},
        {"rotation_deg", scene.global_jitter.rotation_deg},
        {"tx", scene.global_jitter.tx},
        {"ty", scene.global_jitter.ty}}},
      {"rng_seed", scene.rng_seed},
      {"composition", std::move(comp)},
  };
}

SceneSpec scene_from_json(const nlohmann::json& j, const Catalog& catalog) {
  ju::require_object(j, "");
  ju::reject_unknown(j, "", {"width", "height", "tiles", "photometrics", "global_jitter", "rng_seed", "composition"});
  SceneSpec s;
  s.width = static_cast<int>(j.contains("width") ? ju::integer(j, "", "width") : 480);
  s.height = static_cast<int>(j.contains("height") ? ju::integer(j, "", "height") : 480);
  if (s.width < 1 || s.width > 4096) throw SchemaError("width", "must be in [1, 4096]");
  if (s.height < 1 || s.height > 4096) throw SchemaError("height", "must be in [1, 4096]");

  const auto& tiles = ju::array(j, "", "tiles");
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const std::string path = ju::index("tiles", i);
    const auto& t = tiles[i];
    ju::require_object(t, path);
    ju::reject_unknown(t, path, {"spec_id", "cx", "cy", "theta_deg"});
    TilePose tp;
    tp.spec_id = ju::string(t, path, "spec_id");
    if (!catalog.contains(tp.spec_id)) throw SchemaError(ju::join(path, "spec_id"), "unknown tile spec '" + tp.spec_id + "'");
    const TileSpec& spec = catalog.at(tp.spec_id);
    const double cx = ju::number(t, path, "cx");
    const double cy = ju::number(t, path, "cy");
    const double th = ju::number_or(t, path, "theta_deg", 0.0);
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(th)) throw SchemaError(path, "non-finite pose");
    tp.pose = {cx, cy, spec.w, spec.h, normalize_deg(th)};
    s.tiles.push_back(std::move(tp));
  }

  if (j.contains("photometrics") && !j["photometrics"].is_null()) {
    const auto& p = j["photometrics"];
    ju::require_object(p, "photometrics");
    ju::reject_unknown(p, "photometrics", {"brightness_gain", "gamma", "noise_sigma", "shadow"});
    s.photometrics.brightness_gain = ju::number_or(p, "photometrics", "brightness_gain", 1.0);
    s.photometrics.gamma = ju::number_or(p, "photometrics", "gamma", 1.0);
    s.photometrics.noise_sigma = ju::number_or(p, "photometrics", "noise_sigma", 0.0);
    if (!(s.photometrics.brightness_gain > 0.0)) throw SchemaError("photometrics.brightness_gain", "must be > 0");
    if (!(s.photometrics.gamma > 0.0)) throw SchemaError("photometrics.gamma", "must be > 0");
    if (!(s.photometrics.noise_sigma >= 0.0)) throw SchemaError("photometrics.noise_sigma", "must be >= 0");
    if (p.contains("shadow") && !p["shadow"].is_null()) {
      const auto& sh = p["shadow"];
      const std::string sp = "photometrics.shadow";
      ju::require_object(sh, sp);
      ju::reject_unknown(sh, sp, {"cx", "cy", "rx", "ry", "angle_deg", "strength"});
      Shadow sd{ju::number(sh, sp, "cx"),        ju::number(sh, sp, "cy"),
                ju::number(sh, sp, "rx"),        ju::number(sh, sp, "ry"),
                ju::number_or(sh, sp, "angle_deg", 0.0), ju::number(sh, sp, "strength")};
      if (!(sd.rx > 0.0) || !(sd.ry > 0.0)) throw SchemaError(sp, "radii must be > 0");
      if (!(sd.strength >= 0.0 && sd.strength < 1.0)) throw SchemaError(sp + ".strength", "must be in [0, 1)");
      s.photometrics.shadow = sd;
    }
  }

  s.global_jitter.origin = {s.width / 2.0, s.height / 2.0};
  if (j.contains("global_jitter") && !j["global_jitter"].is_null()) {
    const auto& g = j["global_jitter"];
    ju::require_object(g, "global_jitter");
    ju::reject_unknown(g, "global_jitter", {"scale", "rotation_deg", "tx", "ty"});
    s.global_jitter.scale = ju::number_or(g, "global_jitter", "scale", 1.0);
    s.global_jitter.rotation_deg = ju::number_or(g, "global_jitter", "rotation_deg", 0.0);
    s.global_jitter.tx = ju::number_or(g, "global_jitter", "tx", 0.0);
    s.global_jitter.ty = ju::number_or(g, "global_jitter", "ty", 0.0);
    if (!(s.global_jitter.scale > 0.0)) throw SchemaError("global_jitter.scale", "must be > 0");
  }

  if (j.contains("rng_seed")) {
    const auto& r = j["rng_seed"];
    if (!r.is_number_integer()) throw SchemaError("rng_seed", "expected an integer");
    s.rng_seed = r.get<std::uint64_t>();
  }
  if (j.contains("composition") && !j["composition"].is_null()) {
    const auto& c = j["composition"];
    ju::require_object(c, "composition");
    ju::reject_unknown(c, "composition", {"template_id", "alternatives"});
    CompositionInfo info;
    info.template_id = ju::string(c, "composition", "template_id");
    for (const auto& a : ju::array(c, "composition", "alternatives")) {
      if (!a.is_number_unsigned()) throw SchemaError("composition.alternatives", "expected non-negative integers");
      info.alternatives.push_back(a.get<std::size_t>());
    }
    s.composition = std::move(info);
  }
  return s;
}

nlohmann::json to_json(const TileAnnotation& a) {
  return {
      {"spec_id", a.spec_id},
      {"shape", std::string(to_string(a.shape))},
      {"cx", a.cx},
      {"cy", a.cy},
      {"theta_deg", a.theta_deg},
      {"orientation_bin", a.orientation_bin},
      {"scale", a.scale},
      {"aabb", {a.aabb.x0, a.aabb.y0, a.aabb.x1, a.aabb.y1}},
      {"vertices", polygon_to_json(a.vertices)},
  };
}

nlohmann::json annotation_to_json(const std::string& image, int width, int height,
                                  const std::vector<TileAnnotation>& tiles) {
  nlohmann::json arr = nlohmann::json::array();
  for (const TileAnnotation& a : tiles) arr.push_back(to_json(a));
  return {{"image", image}, {"width", width}, {"height", height}, {"tiles", std::move(arr)}};
}

std::vector<TileAnnotation> annotations_from_json(const nlohmann::json& j) {
  ju::require_object(j, "");
  const auto& tiles = ju::array(j, "", "tiles");
  std::vector<TileAnnotation> out;
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const std::string path = ju::index("tiles", i);
    const auto& t = tiles[i];
    ju::require_object(t, path);
    TileAnnotation a;
    a.spec_id = ju::string(t, path, "spec_id");
    const std::string shape = ju::string(t, path, "shape");
    try {
      a.shape = shape_from_string(shape);
    } catch (const std::invalid_argument&) {
      throw SchemaError(ju::join(path, "shape"), "unknown shape '" + shape + "'");
    }
    a.cx = ju::number(t, path, "cx");
    a.cy = ju::number(t, path, "cy");
    a.theta_deg = ju::number(t, path, "theta_deg");
    a.orientation_bin = static_cast<int>(ju::integer(t, path, "orientation_bin"));
    a.scale = ju::number_or(t, path, "scale", 1.0);
    a.vertices = polygon_from_json(ju::field(t, path, "vertices"), ju::join(path, "vertices"));
    const auto& bb = ju::array(t, path, "aabb");
    if (bb.size() != 4) throw SchemaError(ju::join(path, "aabb"), "expected [x0, y0, x1, y1]");
    a.aabb = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
    out.push_back(std::move(a));
  }
  return out;
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const ManifestEntry& e : m.entries) {
    nlohmann::json je{{"image_path", e.image_path}, {"annotation_path", e.annotation_path}, {"scene_path", e.scene_path}};
    if (!e.error.empty()) je["error"] = e.error;
    entries.push_back(std::move(je));
  }
  return {{"version", m.version}, {"seed", m.seed}, {"mode", m.mode}, {"count", m.count()}, {"entries", std::move(entries)}};
}

}  // namespace tilesense::scenegen
