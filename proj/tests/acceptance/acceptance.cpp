// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "tilesense/bench.hpp"
#include "tilesense/compose.hpp"
#include "tilesense/config.hpp"
#include "tilesense/encoding.hpp"
#include "tilesense/eval.hpp"
#include "tilesense/geometry.hpp"
#include "tilesense/losses.hpp"
#include "tilesense/refdetect.hpp"
#include "tilesense/rng.hpp"
#include "tilesense/scenegen.hpp"
#include "tilesense/tools/cli.hpp"

namespace fs = std::filesystem;
using namespace tilesense;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Reported F-scores follow from the reported precision and recall.
Outcome fscore_arithmetic() {
  struct Row {
    const char* name;
    double r, p, f;
  };
  const Row rows[] = {{"MobileNet1", 99.04, 99.57, 99.30},
                      {"MobileNet2", 99.57, 98.83, 99.20},
                      {"VGG1", 98.83, 99.46, 99.14},
                      {"VGG2", 99.36, 97.99, 98.67}};
  Outcome o{true, ""};
  for (const Row& row : rows) {
    const double f = fscore(row.p, row.r);
    const bool ok = std::abs(f - row.f) <= 0.01;
    o.pass = o.pass && ok;
    o.detail += fmt("%s %.4f vs %.2f%s; ", row.name, f, row.f, ok ? "" : " (off)");
  }
  return o;
}

// 2. Encoding then decoding perfect head outputs recovers every tile.
Outcome encode_decode_round_trip() {
  const Catalog& catalog = default_catalog();
  const AnchorGrid grid = build_anchors(480, 480, default_anchor_levels());
  const scenegen::SceneConfig sc = scenegen::SceneConfig::clean();
  const OrientationBins bins;
  std::vector<MatchResult> results;
  double max_center = 0.0, max_theta = 0.0;
  std::size_t tiles = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto scene = scenegen::sample_scene(derive_seed(2024, i), sc);
    const auto gt_tiles = scenegen::annotate(scene, catalog);
    const auto dets = decode(perfect_predictions(encode(gt_tiles, grid, catalog)), grid, catalog);
    const auto gts = ground_truth_detections(gt_tiles);
    MatchResult m = match_detections(dets, gts);
    for (const Match& mt : m.matches) {
      const Detection& d = dets[mt.pred];
      const scenegen::TileAnnotation& g = gt_tiles[mt.gt];
      max_center = std::max(max_center, std::hypot(d.pose.cx - g.cx, d.pose.cy - g.cy));
      max_theta = std::max(max_theta, angular_error(d.pose.theta, g.theta_deg, symmetry_of(g.shape)));
    }
    tiles += gts.size();
    results.push_back(std::move(m));
  }
  const Metrics mx = compute_metrics(results);
  const bool pass = mx.precision == 100.0 && mx.recall == 100.0 && max_center <= 0.01 &&
                    max_theta <= bins.gap_deg() / 2 + 1e-9;
  return {pass, fmt("%zu tiles, P %.2f R %.2f, max center error %.2e px, max orientation error %.3f deg", tiles,
                    mx.precision, mx.recall, max_center, max_theta)};
}

// 3. Polygon-clipping IoU agrees with a Monte Carlo estimate.
Outcome rotated_iou_vs_monte_carlo() {
  Rng rng(99);
  constexpr int kPairs = 200;
  constexpr int kSamples = 1'000'000;
  double worst = 0.0;
  for (int k = 0; k < kPairs; ++k) {
    auto random_box = [&](double cx, double cy) {
      return polygon_of(ShapeClass::rectangle, make_oriented_box(cx + rng.uniform(-30, 30), cy + rng.uniform(-30, 30),
                                                                 rng.uniform(10, 90), rng.uniform(10, 90),
                                                                 rng.uniform(0, 360)));
    };
    const Polygon a = random_box(0, 0);
    const Polygon b = random_box(0, 0);
    const double exact = rotated_iou(a, b);

    AxisBox u = bounding_box(a);
    const AxisBox bb = bounding_box(b);
    u = {std::min(u.x0, bb.x0), std::min(u.y0, bb.y0), std::max(u.x1, bb.x1), std::max(u.y1, bb.y1)};
    long both = 0, either = 0;
    for (int s = 0; s < kSamples; ++s) {
      const Point2 p{rng.uniform(u.x0, u.x1), rng.uniform(u.y0, u.y1)};
      const bool ia = contains(a, p), ib = contains(b, p);
      both += ia && ib;
      either += ia || ib;
    }
    const double mc = either ? static_cast<double>(both) / static_cast<double>(either) : 0.0;
    worst = std::max(worst, std::abs(mc - exact));
  }
  return {worst <= 0.01, fmt("%d pairs, %d samples each, max |exact - MC| = %.5f", kPairs, kSamples, worst)};
}

Metrics refdetect_f(const scenegen::SceneConfig& sc, std::uint64_t seed, int n, double* ms_per_image) {
  const Catalog& catalog = sc.catalog;
  std::vector<MatchResult> results;
  double total_ms = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto scene = scenegen::sample_scene(derive_seed(seed, static_cast<std::uint64_t>(i)), sc);
    const Image img = scenegen::rasterize(scene, catalog);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dets = detect(img, catalog);
    total_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const auto gts = ground_truth_detections(scenegen::annotate(scene, catalog));
    results.push_back(match_detections(dets, gts));
  }
  *ms_per_image = total_ms / n;
  return compute_metrics(results);
}

// 4. Reference detector on clean renders.
Outcome refdetect_clean() {
  scenegen::SceneConfig sc;
  sc.photometrics = scenegen::PhotometricRanges::none();
  double ms = 0.0;
  const Metrics m = refdetect_f(sc, 4, 500, &ms);
  return {m.fscore >= 99.0, fmt("500 scenes, tp %zu fp %zu fn %zu, F %.2f at tau 5 (%.1f ms/image)", m.tp, m.fp, m.fn,
                                m.fscore, ms)};
}

// 5. Reference detector under gain, gamma and noise.
Outcome refdetect_photometric() {
  scenegen::SceneConfig sc;
  sc.photometrics.shadow_probability = 0.0;
  double ms = 0.0;
  const Metrics m = refdetect_f(sc, 5, 500, &ms);
  return {m.fscore >= 95.0, fmt("500 scenes, gain %.1f-%.1f gamma %.2f-%.2f noise <= %.0f, F %.2f (%.1f ms/image)",
                                sc.photometrics.gain.lo, sc.photometrics.gain.hi, sc.photometrics.gamma.lo,
                                sc.photometrics.gamma.hi, sc.photometrics.noise_sigma.hi, m.fscore, ms)};
}

compose::CompositionResult check_scene(const scenegen::SceneSpec& scene) {
  const Image img = scenegen::rasterize(scene, default_catalog());
  const auto dets = detect(img, default_catalog());
  return compose::check_composition(dets, "mushroom", compose::default_registry());
}

// Rotates every tile about the image center by phi and shifts by (tx, ty).
scenegen::SceneSpec rigidly_moved(scenegen::SceneSpec scene, double phi, double tx, double ty) {
  const Point2 c{scene.width / 2.0, scene.height / 2.0};
  for (scenegen::TilePose& t : scene.tiles) {
    const Point2 p = rotate({t.pose.cx - c.x, t.pose.cy - c.y}, phi);
    t.pose.cx = c.x + p.x + tx;
    t.pose.cy = c.y + p.y + ty;
    t.pose.theta = normalize_deg(t.pose.theta + phi);
  }
  return scene;
}

// 6. Composition verdicts: complete, one tile removed, rigid invariance.
Outcome mushroom_composition() {
  const auto& registry = compose::default_registry();
  const scenegen::SceneConfig sc = scenegen::SceneConfig::clean();
  std::string detail;
  bool pass = true;

  std::vector<scenegen::SceneSpec> bases;
  for (std::size_t stem = 0; stem < 2; ++stem) {
    bases.push_back(scenegen::sample_composition("mushroom", {}, 11 + stem, registry, sc,
                                                 std::vector<std::size_t>{0, stem}));
    const auto full = check_scene(bases.back());
    const bool complete = full.complete && full.chosen_alternatives[1] == stem;
    int removal_ok = 0;
    for (std::size_t i = 0; i < bases.back().tiles.size(); ++i) {
      scenegen::SceneSpec cut = bases.back();
      cut.tiles.erase(cut.tiles.begin() + static_cast<std::ptrdiff_t>(i));
      const auto r = check_scene(cut);
      removal_ok += !r.complete && r.missing.size() == 1;
    }
    pass = pass && complete && removal_ok == static_cast<int>(bases.back().tiles.size());
    detail += fmt("stem %zu complete=%s, single removals flagged %d/%zu; ", stem, complete ? "yes" : "no", removal_ok,
                  bases.back().tiles.size());
  }

  Rng rng(6);
  int unchanged = 0;
  for (int trial = 0; trial < 100; ++trial) {
    scenegen::SceneSpec base = bases[static_cast<std::size_t>(trial % 2)];
    if (trial % 4 >= 2) base.tiles.erase(base.tiles.begin() + static_cast<std::ptrdiff_t>(rng.below(base.tiles.size())));
    scenegen::SceneSpec moved;
    do {
      moved = rigidly_moved(base, rng.uniform(0, 360), rng.uniform(-80, 80), rng.uniform(-80, 80));
    } while (!scenegen::scene_is_valid(moved, default_catalog()));
    const auto a = check_scene(base);
    const auto b = check_scene(moved);
    unchanged += a.complete == b.complete && a.missing.size() == b.missing.size();
  }
  pass = pass && unchanged == 100;
  detail += fmt("rigid transforms unchanged %d/100", unchanged);
  return {pass, detail};
}

// 7. Focal loss limits and analytic gradients.
Outcome focal_loss_checks() {
  LossConfig cfg;
  const double at_one = focal_loss(1.0, cfg);
  LossConfig ce{1.0, 0.0, 1.0};
  double ce_err = 0.0;
  for (double p : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999}) ce_err = std::max(ce_err, std::abs(focal_loss(p, ce) + std::log(p)));

  Rng rng(7);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(48);
    std::vector<double> z(n), g(n);
    for (double& v : z) v = rng.normal(0.0, 3.0);
    const std::size_t target = rng.below(n);
    LossConfig c{rng.uniform(0.05, 1.0), rng.uniform(0.0, 4.0), 1.0};
    softmax_focal_loss(z, target, c, g);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-5;
      std::vector<double> zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      const double fd = (softmax_focal_loss(zp, target, c) - softmax_focal_loss(zm, target, c)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[j]) / std::max({std::abs(fd), std::abs(g[j]), 1e-3}));
    }
  }
  const bool pass = at_one == 0.0 && ce_err <= 1e-9 && worst <= 1e-5;
  return {pass, fmt("FL(1) = %g, |FL - CE| max %.2e, worst gradient relative error %.2e over 100 tensors", at_one,
                    ce_err, worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. Dataset generation is byte-for-byte reproducible.
Outcome generate_determinism() {
  const fs::path root = fs::temp_directory_path() / "tilesense_acceptance_gen";
  fs::remove_all(root);
  std::ostringstream out, err;
  for (const char* run : {"a", "b"}) {
    const int code =
        cli::run({"generate", "--count", "100", "--seed", "7", "--out", (root / run).string()}, out, err);
    if (code != 0) return {false, "generate failed: " + err.str()};
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(root / "a" / "annotations")) {
    ++compared;
    differing += slurp(e.path()) != slurp(root / "b" / "annotations" / e.path().filename());
  }
  const bool manifest_same = slurp(root / "a" / "manifest.json") == slurp(root / "b" / "manifest.json");
  fs::remove_all(root);
  return {compared == 100 && differing == 0 && manifest_same,
          fmt("%zu annotation files compared, %zu differ, manifests %s", compared, differing,
              manifest_same ? "identical" : "differ")};
}

// 9. Latency of decode + rotated NMS and of the reference detector.
Outcome latency() {
  PipelineConfig cfg;
  scenegen::SceneConfig sc;
  sc.photometrics = scenegen::PhotometricRanges::none();
  std::vector<scenegen::SceneSpec> scenes;
  for (int i = 0; i < cfg.bench.images; ++i) scenes.push_back(scenegen::sample_scene(derive_seed(9, i), sc));
  const TimingReport r = bench(cfg, scenes, cfg.bench.iterations, cfg.bench.warmup);
  const double dn = r.stage("decode_nms").median_ms, det = r.stage("detect").median_ms;
  return {r.anchors == 1189 && dn < 5.0 && det < 50.0,
          fmt("%zu anchors, decode+NMS median %.3f ms, refdetect median %.2f ms (%s)", r.anchors, dn, det,
              r.environment.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"fscore arithmetic", fscore_arithmetic},
      {"encode/decode round trip", encode_decode_round_trip},
      {"rotated IoU vs Monte Carlo", rotated_iou_vs_monte_carlo},
      {"refdetect clean", refdetect_clean},
      {"refdetect photometric", refdetect_photometric},
      {"mushroom composition", mushroom_composition},
      {"focal loss", focal_loss_checks},
      {"generate determinism", generate_determinism},
      {"latency", latency},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
