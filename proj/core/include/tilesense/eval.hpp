#pragma once

// Vertex-matched precision / recall / F-score.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tilesense/catalog.hpp"
#include "tilesense/detection.hpp"
#include "tilesense/scenegen.hpp"

namespace tilesense {

struct MatchConfig {
  double tau_vertex = 5.0;     ///< pixels, max mean vertex distance
  bool require_class = true;
  bool hungarian = false;      ///< optimal assignment instead of greedy

  /// Throws std::invalid_argument unless tau_vertex > 0.
  void validate() const;
};

struct Match {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double cost = 0.0;
};

struct MatchResult {
  std::vector<Match> matches;
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
};

/// Minimum over cyclic vertex alignments of the mean vertex distance; for
/// polygonal tiles this covers every symmetry-equivalent orientation.
/// Throws std::invalid_argument when the vertex counts differ.
double vertex_cost(const Polygon& pred, const Polygon& gt);

/// Ground truth as detections (score 1) so both sides share one type.
std::vector<Detection> ground_truth_detections(std::span<const scenegen::TileAnnotation> tiles);

/// One-to-one matching of pairs with cost <= tau_vertex (and equal class when
/// required). Greedy by ascending (cost, pred, gt) unless cfg.hungarian.
/// Throws std::invalid_argument when a same-shape pair has different vertex
/// counts.
MatchResult match_detections(std::span<const Detection> preds, std::span<const Detection> gts,
                             const MatchConfig& cfg = {});

struct Metrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;  ///< percent
  double recall = 0.0;     ///< percent
  double fscore = 0.0;     ///< percent

  static Metrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
};

/// 2PR / (P + R), 0 when P + R = 0.
double fscore(double precision, double recall);

/// Sums counts over images.
Metrics compute_metrics(std::span<const MatchResult> results);

struct ImageReport {
  std::string name;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  MatchResult match;
};

struct EvalReport {
  Metrics metrics;
  std::vector<ImageReport> per_image;
};

/// Scores one image's predictions against its ground truth.
ImageReport evaluate_image(const std::string& name, std::span<const Detection> preds,
                           std::span<const Detection> gts, const MatchConfig& cfg);

/// Ground truth is every annotation JSON in `gt` (a directory, a dataset root
/// with annotations/, or a single file); predictions are looked up by file
/// stem in `pred` (a directory or a single file). Missing prediction files
/// count as empty. Throws std::runtime_error for unreadable inputs.
EvalReport evaluate_dataset(const std::filesystem::path& pred, const std::filesystem::path& gt,
                            const MatchConfig& cfg, const Catalog& catalog);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const EvalReport& r);

}  // namespace tilesense
