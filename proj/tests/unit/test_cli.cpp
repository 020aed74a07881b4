#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tilesense/config.hpp"
#include "tilesense/encoding.hpp"
#include "tilesense/tools/cli.hpp"

namespace tilesense::cli {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / "tilesense_unit_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  int call(const std::vector<std::string>& args) {
    out.str("");
    err.str("");
    return run(args, out, err);
  }

  fs::path dir;
  std::ostringstream out, err;
};

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(call({}), kUsage);
  EXPECT_EQ(call({"frobnicate"}), kUsage);
  EXPECT_EQ(call({"generate", "--seed", "1"}), kUsage);  // --count and --out are required
  EXPECT_EQ(call({"generate", "--count", "x", "--out", "d"}), kUsage);
  EXPECT_EQ(call({"generate", "--count", "1", "--out", "d", "--mode", "weird"}), kUsage);
  EXPECT_EQ(call({"eval", "--pred", "p"}), kUsage);
  EXPECT_EQ(call({"serve", "--port", "0"}), kUsage);
  EXPECT_EQ(call({"--help"}), kOk);
  EXPECT_NE(out.str().find("generate"), std::string::npos);
}

TEST_F(Cli, RuntimeErrors) {
  EXPECT_EQ(call({"detect", "--image", (dir / "missing.png").string()}), kFailure);
  EXPECT_FALSE(err.str().empty());
  EXPECT_EQ(call({"decode", "--pred", (dir / "missing.pred").string()}), kFailure);
  std::ofstream(dir / "cfg.json") << R"({"version": 3})";
  EXPECT_EQ(call({"bench", "--config", (dir / "cfg.json").string()}), kFailure);
  EXPECT_NE(err.str().find("version"), std::string::npos);
}

TEST_F(Cli, GenerateDetectEval) {
  ASSERT_EQ(call({"generate", "--count", "4", "--seed", "3", "--out", (dir / "data").string(), "--mode", "mixed"}),
            kOk);
  ASSERT_EQ(call({"detect", "--image", (dir / "data" / "images").string(), "--out", (dir / "pred").string()}), kOk);
  ASSERT_EQ(call({"eval", "--pred", (dir / "pred").string(), "--gt", (dir / "data").string(), "--tau", "5"}), kOk);
  const auto report = nlohmann::json::parse(out.str());
  EXPECT_EQ(report["fscore"], 100.0);
  EXPECT_EQ(report["tau_vertex"], 5.0);

  const fs::path one = dir / "data" / "images" / "000000.png";
  ASSERT_EQ(call({"detect", "--image", one.string()}), kOk);
  EXPECT_FALSE(nlohmann::json::parse(out.str())["detections"].empty());
}

TEST_F(Cli, DecodeExternalTensor) {
  const PipelineConfig cfg;
  const auto scene = scenegen::sample_scene(8, scenegen::SceneConfig::clean());
  const auto tiles = scenegen::annotate(scene, cfg.catalog);
  save_predictions(perfect_predictions(encode(tiles, cfg.anchor_grid(), cfg.catalog)), dir / "t.pred");
  ASSERT_EQ(call({"decode", "--pred", (dir / "t.pred").string(), "--out", (dir / "dets.json").string()}), kOk);
  std::ifstream in(dir / "dets.json");
  EXPECT_EQ(nlohmann::json::parse(in)["detections"].size(), tiles.size());
}

TEST_F(Cli, BenchReportsStages) {
  std::ofstream(dir / "cfg.json") << R"({"version": 1, "bench": {"images": 2, "warmup": 5}})";
  ASSERT_EQ(call({"bench", "--config", (dir / "cfg.json").string(), "--iters", "3"}), kOk);
  const auto r = nlohmann::json::parse(out.str());
  EXPECT_EQ(r["iterations"], 3);
  EXPECT_EQ(r["anchors"], 1189);
  for (const char* s : {"render", "segment", "fit", "decode", "nms", "total", "detect", "decode_nms"}) {
    EXPECT_EQ(r["stages"][s]["samples"], 3) << s;
    EXPECT_LE(r["stages"][s]["median_ms"].get<double>(), r["stages"][s]["p95_ms"].get<double>());
  }
}

}  // namespace
}  // namespace tilesense::cli
