#pragma once

// Per-stage wall-clock timing of the reference pipeline and of decode + NMS.

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tilesense/config.hpp"
#include "tilesense/scenegen.hpp"

namespace tilesense {

struct StageTiming {
  std::string name;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t samples = 0;
};

struct TimingReport {
  std::vector<StageTiming> stages;
  int iterations = 0;
  int warmup = 0;
  std::size_t images = 0;
  std::size_t anchors = 0;
  std::string environment;

  /// Throws std::out_of_range for an unknown stage.
  const StageTiming& stage(const std::string& name) const;
};

/// Median and 95th percentile (nearest rank) of the samples, in ms.
StageTiming summarize(std::string name, std::vector<double> samples_ms);

/// Single-threaded. Each iteration takes the next scene and times, in order:
///   render      rasterize
///   segment     color segmentation
///   fit         pose fit of every region plus NMS
///   decode      decode_candidates on the scene's perfect tensor
///   nms         NMS of those candidates
///   total       the five stages above, end to end
/// plus "detect" (segment + fit as one call) and "decode_nms" (decode as one
/// call). `warmup` untimed iterations come first.
TimingReport bench(const PipelineConfig& config, std::span<const scenegen::SceneSpec> scenes, int iterations,
                   int warmup = 5);

/// Compiler, build type and thread count.
std::string environment_note();

nlohmann::json to_json(const TimingReport& r);

}  // namespace tilesense
