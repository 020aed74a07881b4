#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "tilesense/encoding.hpp"
#include "tilesense/rng.hpp"

namespace tilesense {
namespace {

namespace fs = std::filesystem;

TEST(Anchors, GridSizeAndOrder) {
  const AnchorGrid g = build_anchors(480, 480, default_anchor_levels());
  ASSERT_EQ(g.size(), 30u * 30 + 15 * 15 + 8 * 8);
  EXPECT_EQ(g.size(), 1189u);
  EXPECT_DOUBLE_EQ(g.anchors[0].cx, 8);
  EXPECT_DOUBLE_EQ(g.anchors[0].w, 20);
  EXPECT_DOUBLE_EQ(g.anchors[1].cx, 24);
  EXPECT_DOUBLE_EQ(g.anchors[30].cy, 24);
  EXPECT_DOUBLE_EQ(g.anchors[900].cx, 16);
  EXPECT_DOUBLE_EQ(g.anchors[900].w, 40);
  EXPECT_DOUBLE_EQ(g.anchors.back().w, 80);
  EXPECT_THROW(build_anchors(480, 480, std::vector<AnchorLevel>{}), std::invalid_argument);
}

TEST(Anchors, OffsetsInvert) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Anchor a{rng.uniform(0, 480), rng.uniform(0, 480), rng.uniform(10, 100), rng.uniform(10, 100)};
    const CenterBox b{rng.uniform(0, 480), rng.uniform(0, 480), rng.uniform(5, 150), rng.uniform(5, 150)};
    const CenterBox r = apply_offsets(a, offsets_of(a, b));
    EXPECT_NEAR(r.cx, b.cx, 1e-9);
    EXPECT_NEAR(r.cy, b.cy, 1e-9);
    EXPECT_NEAR(r.w, b.w, 1e-9);
    EXPECT_NEAR(r.h, b.h, 1e-9);
  }
}

class EncodeTest : public ::testing::Test {
 protected:
  const Catalog& catalog = default_catalog();
  AnchorGrid grid = build_anchors(480, 480, default_anchor_levels());
};

TEST_F(EncodeTest, EveryTileGetsAPositive) {
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto tiles = scenegen::annotate(scenegen::sample_scene(i, {}), catalog);
    const TargetTensor t = encode(tiles, grid, catalog);
    std::vector<int> hits(tiles.size(), 0);
    for (std::size_t a = 0; a < t.size(); ++a) {
      if (!t.positive[a]) {
        EXPECT_EQ(t.orientation_target[a], -1);
        continue;
      }
      const auto& tile = tiles[static_cast<std::size_t>(t.matched_gt[a])];
      ++hits[static_cast<std::size_t>(t.matched_gt[a])];
      EXPECT_EQ(t.class_target[a], static_cast<int>(catalog.index_of(tile.spec_id)) + 1);
      EXPECT_EQ(t.orientation_target[a], tile.orientation_bin);
      EXPECT_FALSE(t.negative_candidate[a]);
    }
    for (int h : hits) EXPECT_GE(h, 1);
    std::size_t candidates = 0;
    for (std::size_t a = 0; a < t.size(); ++a) {
      candidates += t.negative_candidate[a];
      if (t.sampled_negative[a]) EXPECT_TRUE(t.negative_candidate[a]);
    }
    EXPECT_EQ(t.num_sampled_negative(), std::min(t.num_positive(), candidates));
  }
}

TEST_F(EncodeTest, NegativeSampleDependsOnlyOnTheSeed) {
  const auto tiles = scenegen::annotate(scenegen::sample_scene(7, {}), catalog);
  EncodeConfig a, b;
  a.negative_seed = b.negative_seed = 11;
  EXPECT_EQ(encode(tiles, grid, catalog, a).sampled_negative, encode(tiles, grid, catalog, b).sampled_negative);
  b.negative_seed = 12;
  EXPECT_NE(encode(tiles, grid, catalog, a).sampled_negative, encode(tiles, grid, catalog, b).sampled_negative);
}

TEST_F(EncodeTest, RejectsUnknownSpecs) {
  auto tiles = scenegen::annotate(scenegen::sample_scene(7, {}), catalog);
  tiles[0].spec_id = "nope";
  EXPECT_THROW(encode(tiles, grid, catalog), std::invalid_argument);
}

TEST_F(EncodeTest, DecodeRecoversPosesFromPerfectOutputs) {
  const auto scene = scenegen::sample_scene(21, scenegen::SceneConfig::clean());
  const auto tiles = scenegen::annotate(scene, catalog);
  const auto dets = decode(perfect_predictions(encode(tiles, grid, catalog)), grid, catalog);
  ASSERT_EQ(dets.size(), tiles.size());
  for (const auto& tile : tiles) {
    const auto it = std::find_if(dets.begin(), dets.end(), [&](const Detection& d) {
      return d.spec_id == tile.spec_id && std::hypot(d.pose.cx - tile.cx, d.pose.cy - tile.cy) < 0.01;
    });
    ASSERT_NE(it, dets.end()) << tile.spec_id;
    EXPECT_EQ(it->orientation_bin, tile.orientation_bin);
    EXPECT_GT(it->score, 0.99);
  }
}

TEST_F(EncodeTest, ThresholdAndShapeChecks) {
  PredictionTensor empty(grid.size(), catalog.size(), 48);
  EXPECT_TRUE(decode(empty, grid, catalog).empty());  // uniform logits never reach 0.5
  PredictionTensor wrong(grid.size(), catalog.size() + 1, 48);
  EXPECT_THROW(decode(wrong, grid, catalog), std::invalid_argument);
  PredictionTensor short_grid(grid.size() - 1, catalog.size(), 48);
  EXPECT_THROW(decode(short_grid, grid, catalog), std::invalid_argument);
}

class PredictionIo : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / "tilesense_unit_predio";
    fs::remove_all(dir);
    fs::create_directories(dir);
    pred = PredictionTensor(20, 6, 48);
    Rng rng(5);
    for (double& v : pred.data()) v = static_cast<float>(rng.normal(0, 2));
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
  PredictionTensor pred;
};

TEST_F(PredictionIo, RoundTripsBothForms) {
  save_predictions(pred, dir / "cat.pred", true);
  EXPECT_EQ(load_predictions(dir / "cat.pred"), pred);
  save_predictions(pred, dir / "sep.json", false);
  EXPECT_TRUE(fs::exists(dir / "sep.bin"));
  EXPECT_EQ(load_predictions(dir / "sep.json"), pred);
}

TEST_F(PredictionIo, HeaderDescribesTheLayout) {
  save_predictions(pred, dir / "cat.pred", true);
  std::ifstream in(dir / "cat.pred", std::ios::binary);
  std::string line;
  std::getline(in, line);
  const auto h = nlohmann::json::parse(line);
  EXPECT_EQ(h["anchors"], 20);
  EXPECT_EQ(h["classes"], 6);
  EXPECT_EQ(h["bins"], 48);
  EXPECT_EQ(h["layout"], "class|orientation|offsets");
  EXPECT_EQ(h["dtype"], "f32le");
  EXPECT_EQ(h["offset"].get<std::size_t>(), line.size() + 1);
  EXPECT_EQ(fs::file_size(dir / "cat.pred"), line.size() + 1 + 20 * (7 + 48 + 4) * 4);
}

TEST_F(PredictionIo, RejectsDamagedFiles) {
  save_predictions(pred, dir / "cat.pred", true);
  fs::resize_file(dir / "cat.pred", fs::file_size(dir / "cat.pred") - 3);
  EXPECT_THROW(load_predictions(dir / "cat.pred"), std::runtime_error);

  save_predictions(pred, dir / "sep.json", false);
  { std::ofstream(dir / "sep.bin", std::ios::app) << "x"; }
  EXPECT_THROW(load_predictions(dir / "sep.json"), std::runtime_error);

  std::ofstream(dir / "bad.json") << R"({"anchors":1,"classes":6,"bins":48,"layout":"offsets|class","dtype":"f32le"})" << "\n";
  EXPECT_THROW(load_predictions(dir / "bad.json"), std::runtime_error);
  EXPECT_THROW(load_predictions(dir / "missing.json"), std::runtime_error);
}

}  // namespace
}  // namespace tilesense
