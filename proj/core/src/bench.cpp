#include "tilesense/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

#include "tilesense/encoding.hpp"
#include "tilesense/refdetect.hpp"

namespace tilesense {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Prepared {
  const scenegen::SceneSpec* scene;
  PredictionTensor tensor;
};

}  // namespace

const StageTiming& TimingReport::stage(const std::string& name) const {
  for (const StageTiming& s : stages) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no stage named " + name);
}

StageTiming summarize(std::string name, std::vector<double> samples) {
  StageTiming t;
  t.name = std::move(name);
  t.samples = samples.size();
  if (samples.empty()) return t;
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  t.median_ms = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  t.p95_ms = samples[std::clamp<std::size_t>(rank, 1, n) - 1];
  t.p95_ms = std::max(t.p95_ms, t.median_ms);
  return t;
}

std::string environment_note() {
  std::string s;
#if defined(__clang__)
  s += "clang " __clang_version__;
#elif defined(__GNUC__)
  s += "gcc " + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__) + "." +
       std::to_string(__GNUC_PATCHLEVEL__);
#else
  s += "unknown compiler";
#endif
#ifdef NDEBUG
  s += ", optimized build";
#else
  s += ", debug build (assertions on)";
#endif
  s += ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads, timed single-threaded";
  return s;
}

TimingReport bench(const PipelineConfig& config, std::span<const scenegen::SceneSpec> scenes, int iterations,
                   int warmup) {
  if (scenes.empty()) throw std::invalid_argument("bench: no scenes");
  if (iterations < 1) throw std::invalid_argument("bench: iterations must be >= 1");
  if (warmup < 5) throw std::invalid_argument("bench: warmup must be >= 5");

  const Catalog& catalog = config.catalog;
  const AnchorGrid grid = config.anchor_grid();
  EncodeConfig enc;
  enc.negative_seed = config.negative_seed;

  std::vector<Prepared> prepared;
  for (const auto& scene : scenes) {
    const auto tiles = scenegen::annotate(scene, catalog);
    prepared.push_back({&scene, perfect_predictions(encode(tiles, grid, catalog, enc))});
  }

  FitParams fit = config.detect.fit;
  fit.erosion_radius = config.detect.segment.erosion_radius;

  std::map<std::string, std::vector<double>> samples;
  std::size_t sink = 0;
  for (int it = 0; it < warmup + iterations; ++it) {
    const Prepared& p = prepared[static_cast<std::size_t>(it) % prepared.size()];
    const bool timed = it >= warmup;

    const auto t_total = Clock::now();
    auto t0 = Clock::now();
    const Image image = scenegen::rasterize(*p.scene, catalog);
    const double render = ms_since(t0);

    t0 = Clock::now();
    const std::vector<Region> regions = segment(image, catalog, config.detect.segment);
    const double seg = ms_since(t0);

    t0 = Clock::now();
    std::vector<Detection> found;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      if (auto d = fit_pose(regions[i], catalog, fit)) {
        d->source = i;
        found.push_back(std::move(*d));
      }
    }
    found = nms(std::move(found), config.detect.nms_iou, config.detect.rotated_nms, config.detect.max_out);
    const double fitting = ms_since(t0);

    t0 = Clock::now();
    std::vector<Detection> cands = decode_candidates(p.tensor, grid, catalog, config.decode);
    const double dec = ms_since(t0);

    t0 = Clock::now();
    const std::vector<Detection> kept = nms(std::move(cands), config.decode.nms_iou, config.decode.rotated_nms,
                                            config.decode.max_out);
    const double suppress = ms_since(t0);
    const double total = ms_since(t_total);

    t0 = Clock::now();
    const std::vector<Detection> detected = detect(image, catalog, config.detect);
    const double detect_ms = ms_since(t0);

    t0 = Clock::now();
    const std::vector<Detection> decoded = decode(p.tensor, grid, catalog, config.decode);
    const double decode_ms = ms_since(t0);

    sink += found.size() + kept.size() + detected.size() + decoded.size();
    if (!timed) continue;
    samples["render"].push_back(render);
    samples["segment"].push_back(seg);
    samples["fit"].push_back(fitting);
    samples["decode"].push_back(dec);
    samples["nms"].push_back(suppress);
    samples["total"].push_back(total);
    samples["detect"].push_back(detect_ms);
    samples["decode_nms"].push_back(decode_ms);
  }

  TimingReport r;
  r.iterations = iterations;
  r.warmup = warmup;
  r.images = scenes.size();
  r.anchors = grid.size();
  r.environment = environment_note();
  for (const char* name : {"render", "segment", "fit", "decode", "nms", "total", "detect", "decode_nms"}) {
    r.stages.push_back(summarize(name, samples[name]));
  }
  if (sink == static_cast<std::size_t>(-1)) r.environment += " ";
  return r;
}

nlohmann::json to_json(const TimingReport& r) {
  nlohmann::json stages = nlohmann::json::object();
  for (const StageTiming& s : r.stages) {
    stages[s.name] = {{"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"samples", s.samples}};
  }
  return {{"stages", std::move(stages)},
          {"iterations", r.iterations},
          {"warmup", r.warmup},
          {"images", r.images},
          {"anchors", r.anchors},
          {"environment", r.environment}};
}

}  // namespace tilesense
