#include "tilesense/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

namespace tilesense {

namespace fs = std::filesystem;

namespace {

bool same_class(const Detection& a, const Detection& b) {
  if (!a.spec_id.empty() && !b.spec_id.empty()) return a.spec_id == b.spec_id;
  return a.shape == b.shape;
}

// Min-cost assignment on an n x m matrix (n <= m), potentials formulation.
// Returns the column assigned to each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost, std::size_t n, std::size_t m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::vector<fs::path> json_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void MatchConfig::validate() const {
  if (!(tau_vertex > 0.0) || !std::isfinite(tau_vertex)) throw std::invalid_argument("tau_vertex must be > 0");
}

double vertex_cost(const Polygon& pred, const Polygon& gt) {
  const std::size_t n = gt.size();
  if (pred.size() != n) {
    throw std::invalid_argument("vertex count mismatch: " + std::to_string(pred.size()) + " vs " + std::to_string(n));
  }
  if (n == 0) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t shift = 0; shift < n; ++shift) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n && sum < best * static_cast<double>(n); ++i) {
      sum += distance(pred[(i + shift) % n], gt[i]);
    }
    best = std::min(best, sum / static_cast<double>(n));
  }
  return best;
}

std::vector<Detection> ground_truth_detections(std::span<const scenegen::TileAnnotation> tiles) {
  std::vector<Detection> out;
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto& t = tiles[i];
    Detection d;
    d.shape = t.shape;
    d.spec_id = t.spec_id;
    d.score = 1.0;
    d.pose = {t.cx, t.cy, t.aabb.width(), t.aabb.height(), t.theta_deg};
    d.orientation_bin = t.orientation_bin;
    d.vertices = t.vertices;
    d.box = t.aabb;
    d.source = i;
    out.push_back(std::move(d));
  }
  return out;
}

MatchResult match_detections(std::span<const Detection> preds, std::span<const Detection> gts,
                             const MatchConfig& cfg) {
  cfg.validate();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cost(preds.size(), std::vector<double>(gts.size(), inf));
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (cfg.require_class && !same_class(preds[p], gts[g])) continue;
      const bool comparable = preds[p].vertices.size() == gts[g].vertices.size();
      if (!comparable) {
        if (preds[p].shape == gts[g].shape) {
          throw std::invalid_argument("prediction " + std::to_string(p) + " and ground truth " + std::to_string(g) +
                                      " have the same shape but different vertex counts");
        }
        continue;
      }
      const double c = vertex_cost(preds[p].vertices, gts[g].vertices);
      if (c <= cfg.tau_vertex) cost[p][g] = c;
    }
  }

  MatchResult r;
  std::vector<char> pred_used(preds.size(), 0);
  std::vector<char> gt_used(gts.size(), 0);
  if (cfg.hungarian && !preds.empty() && !gts.empty()) {
    // Infeasible pairs get a penalty above any sum of feasible costs, so the
    // assignment maximizes the match count first.
    const double big = cfg.tau_vertex * static_cast<double>(std::max(preds.size(), gts.size()) + 1) * 4.0;
    const bool rows_are_preds = preds.size() <= gts.size();
    const std::size_t n = rows_are_preds ? preds.size() : gts.size();
    const std::size_t m = rows_are_preds ? gts.size() : preds.size();
    std::vector<std::vector<double>> c(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double v = rows_are_preds ? cost[i][j] : cost[j][i];
        c[i][j] = std::isfinite(v) ? v : big;
      }
    }
    const auto assign = hungarian(c, n, m);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t p = rows_are_preds ? i : assign[i];
      const std::size_t g = rows_are_preds ? assign[i] : i;
      if (std::isfinite(cost[p][g])) {
        r.matches.push_back({p, g, cost[p][g]});
        pred_used[p] = gt_used[g] = 1;
      }
    }
    std::sort(r.matches.begin(), r.matches.end(),
              [](const Match& a, const Match& b) { return std::tie(a.pred, a.gt) < std::tie(b.pred, b.gt); });
  } else {
    std::vector<Match> pairs;
    for (std::size_t p = 0; p < preds.size(); ++p) {
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (std::isfinite(cost[p][g])) pairs.push_back({p, g, cost[p][g]});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Match& a, const Match& b) {
      return std::tie(a.cost, a.pred, a.gt) < std::tie(b.cost, b.pred, b.gt);
    });
    for (const Match& m : pairs) {
      if (pred_used[m.pred] || gt_used[m.gt]) continue;
      pred_used[m.pred] = gt_used[m.gt] = 1;
      r.matches.push_back(m);
    }
  }
  for (std::size_t p = 0; p < preds.size(); ++p) {
    if (!pred_used[p]) r.unmatched_preds.push_back(p);
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gt_used[g]) r.unmatched_gts.push_back(g);
  }
  return r;
}

double fscore(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Metrics Metrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = tp + fp ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.fscore = tilesense::fscore(m.precision, m.recall);
  return m;
}

Metrics compute_metrics(std::span<const MatchResult> results) {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (const MatchResult& r : results) {
    tp += r.matches.size();
    fp += r.unmatched_preds.size();
    fn += r.unmatched_gts.size();
  }
  return Metrics::from_counts(tp, fp, fn);
}

ImageReport evaluate_image(const std::string& name, std::span<const Detection> preds,
                           std::span<const Detection> gts, const MatchConfig& cfg) {
  ImageReport r;
  r.name = name;
  r.match = match_detections(preds, gts, cfg);
  r.tp = r.match.matches.size();
  r.fp = r.match.unmatched_preds.size();
  r.fn = r.match.unmatched_gts.size();
  return r;
}

EvalReport evaluate_dataset(const fs::path& pred, const fs::path& gt, const MatchConfig& cfg,
                            const Catalog& catalog) {
  std::vector<fs::path> gt_files;
  if (fs::is_directory(gt)) {
    gt_files = json_files(fs::is_directory(gt / "annotations") ? gt / "annotations" : gt);
  } else if (fs::is_regular_file(gt)) {
    gt_files.push_back(gt);
  } else {
    throw std::runtime_error("ground truth not found: " + gt.string());
  }

  const bool pred_is_dir = fs::is_directory(pred);
  if (!pred_is_dir && !fs::is_regular_file(pred)) throw std::runtime_error("predictions not found: " + pred.string());
  if (!pred_is_dir && gt_files.size() != 1) {
    throw std::runtime_error("a single prediction file needs a single ground-truth file");
  }

  EvalReport report;
  std::vector<MatchResult> results;
  for (const fs::path& g : gt_files) {
    const auto tiles = scenegen::annotations_from_json(read_json(g));
    const auto gts = ground_truth_detections(tiles);
    std::vector<Detection> preds;
    const fs::path p = pred_is_dir ? pred / g.filename() : pred;
    if (fs::exists(p)) preds = detections_from_json(read_json(p), catalog);
    ImageReport ir = evaluate_image(g.stem().string(), preds, gts, cfg);
    results.push_back(ir.match);
    report.per_image.push_back(std::move(ir));
  }
  report.metrics = compute_metrics(results);
  return report;
}

nlohmann::json to_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"fscore", m.fscore},
          {"tp", m.tp},               {"fp", m.fp},         {"fn", m.fn}};
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = to_json(r.metrics);
  nlohmann::json per = nlohmann::json::array();
  for (const ImageReport& ir : r.per_image) {
    nlohmann::json matches = nlohmann::json::array();
    for (const Match& m : ir.match.matches) matches.push_back({{"pred", m.pred}, {"gt", m.gt}, {"cost", m.cost}});
    per.push_back({{"image", ir.name},
                   {"tp", ir.tp},
                   {"fp", ir.fp},
                   {"fn", ir.fn},
                   {"matches", std::move(matches)},
                   {"unmatched_preds", ir.match.unmatched_preds},
                   {"unmatched_gts", ir.match.unmatched_gts}});
  }
  j["per_image"] = std::move(per);
  return j;
}

}  // namespace tilesense
