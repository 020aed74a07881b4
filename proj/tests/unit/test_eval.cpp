#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tilesense/eval.hpp"

namespace tilesense {
namespace {

namespace fs = std::filesystem;

Detection square_at(double x, double y = 100, double theta = 0, const std::string& id = "square_blue") {
  Detection d;
  d.spec_id = id;
  d.shape = default_catalog().at(id).shape;
  d.pose = make_oriented_box(x, y, 70, 70, theta);
  d.vertices = polygon_of(d.shape, d.pose);
  d.score = 1.0;
  return d;
}

TEST(Eval, FscoreIsTheHarmonicMean) {
  EXPECT_DOUBLE_EQ(fscore(100, 100), 100);
  EXPECT_DOUBLE_EQ(fscore(0, 0), 0);
  EXPECT_NEAR(fscore(50, 100), 66.6666666667, 1e-9);
  const Metrics m = Metrics::from_counts(8, 2, 0);
  EXPECT_DOUBLE_EQ(m.precision, 80);
  EXPECT_DOUBLE_EQ(m.recall, 100);
  const Metrics none = Metrics::from_counts(0, 0, 0);
  EXPECT_EQ(none.fscore, 0.0);
}

TEST(Eval, VertexCostIgnoresStartingVertex) {
  const Detection a = square_at(100, 100, 10);
  const Detection b = square_at(100, 100, 100);  // same square, vertex list rotated
  EXPECT_NEAR(vertex_cost(a.vertices, b.vertices), 0.0, 1e-9);
  EXPECT_NEAR(vertex_cost(square_at(100).vertices, square_at(103).vertices), 3.0, 1e-9);
  EXPECT_THROW(vertex_cost(a.vertices, Polygon{{{0, 0}, {1, 0}, {0, 1}}}), std::invalid_argument);
}

TEST(Eval, ThresholdAndClass) {
  const std::vector<Detection> gts{square_at(100)};
  EXPECT_EQ(match_detections(std::vector<Detection>{square_at(104.9)}, gts).matches.size(), 1u);
  EXPECT_EQ(match_detections(std::vector<Detection>{square_at(105.1)}, gts).matches.size(), 0u);
  Detection other = square_at(100);
  other.spec_id = "impostor";
  const MatchResult r = match_detections(std::vector<Detection>{other}, gts);
  EXPECT_TRUE(r.matches.empty());
  EXPECT_EQ(r.unmatched_preds.size(), 1u);
  EXPECT_EQ(r.unmatched_gts.size(), 1u);
  MatchConfig loose;
  loose.require_class = false;
  EXPECT_EQ(match_detections(std::vector<Detection>{other}, gts, loose).matches.size(), 1u);
}

TEST(Eval, DuplicatesCountAsFalsePositives) {
  const std::vector<Detection> gts{square_at(100)};
  const std::vector<Detection> preds{square_at(101), square_at(100.5)};
  const MatchResult r = match_detections(preds, gts);
  ASSERT_EQ(r.matches.size(), 1u);
  EXPECT_EQ(r.matches[0].pred, 1u);
  const Metrics m = compute_metrics(std::vector<MatchResult>{r});
  EXPECT_EQ(m.tp, 1u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 0u);
}

TEST(Eval, HungarianBeatsGreedyOnCrossedPairs) {
  const std::vector<Detection> gts{square_at(0), square_at(4)};
  const std::vector<Detection> preds{square_at(1.5), square_at(-3)};
  EXPECT_EQ(match_detections(preds, gts).matches.size(), 1u);
  MatchConfig h;
  h.hungarian = true;
  const MatchResult r = match_detections(preds, gts, h);
  EXPECT_EQ(r.matches.size(), 2u);
  for (const Match& m : r.matches) EXPECT_LE(m.cost, 5.0);
}

TEST(Eval, ConfigValidation) {
  MatchConfig c;
  c.tau_vertex = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Eval, DatasetWithMissingPredictions) {
  const fs::path root = fs::temp_directory_path() / "tilesense_unit_eval";
  fs::remove_all(root);
  const auto manifest = scenegen::generate_dataset(3, 1, root / "data", scenegen::DatasetMode::random);
  fs::create_directories(root / "pred");
  std::size_t first_count = 0;
  {
    std::ifstream in(root / "data" / manifest.entries[0].annotation_path);
    const auto tiles = scenegen::annotations_from_json(nlohmann::json::parse(in));
    first_count = tiles.size();
    const auto gts = ground_truth_detections(tiles);
    std::ofstream(root / "pred" / fs::path(manifest.entries[0].annotation_path).filename())
        << detections_to_json(gts).dump();
  }
  const EvalReport r = evaluate_dataset(root / "pred", root / "data", MatchConfig{}, default_catalog());
  EXPECT_EQ(r.per_image.size(), 3u);
  EXPECT_EQ(r.metrics.tp, first_count);
  EXPECT_EQ(r.metrics.fp, 0u);
  EXPECT_GT(r.metrics.fn, 0u);
  EXPECT_DOUBLE_EQ(r.metrics.precision, 100.0);
  EXPECT_EQ(to_json(r)["per_image"].size(), 3u);
  EXPECT_THROW(evaluate_dataset(root / "pred", root / "nothing", MatchConfig{}, default_catalog()), std::runtime_error);
  fs::remove_all(root);
}

}  // namespace
}  // namespace tilesense
