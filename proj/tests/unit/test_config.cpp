#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tilesense/config.hpp"
#include "tilesense/json_util.hpp"

namespace tilesense {
namespace {

namespace fs = std::filesystem;

std::string field_of(const nlohmann::json& j) {
  try {
    config_from_json(j);
  } catch (const SchemaError& e) {
    return e.field();
  }
  return "<accepted>";
}

TEST(Config, DefaultsAreValidAndRoundTrip) {
  const PipelineConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.anchor_grid().size(), 1189u);
  const nlohmann::json j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
}

TEST(Config, RejectsUnknownAndBadFields) {
  nlohmann::json j = to_json(PipelineConfig{});
  j["decode"]["nms_iuo"] = 0.5;
  EXPECT_EQ(field_of(j), "decode.nms_iuo");

  j = to_json(PipelineConfig{});
  j["version"] = 2;
  EXPECT_EQ(field_of(j), "version");

  j = to_json(PipelineConfig{});
  j["loss"]["alpha"] = 0;
  EXPECT_EQ(field_of(j), "loss.alpha");

  j = to_json(PipelineConfig{});
  j["segment"]["color_tolerance"] = 90;
  EXPECT_NE(field_of(j), "<accepted>");

  j = to_json(PipelineConfig{});
  j["anchors"]["strides"] = {16, "32"};
  EXPECT_NE(field_of(j), "<accepted>");

  EXPECT_EQ(field_of(nlohmann::json{{"version", 1}}), "<accepted>");
}

TEST(Config, DecodeSettingsFeedTheDetector) {
  nlohmann::json j{{"version", 1}, {"decode", {{"nms_iou", 0.3}, {"rotated_nms", false}}}};
  const PipelineConfig c = config_from_json(j);
  EXPECT_DOUBLE_EQ(c.detect.nms_iou, 0.3);
  EXPECT_FALSE(c.detect.rotated_nms);
}

TEST(Config, CatalogPathIsRelativeToTheConfigFile) {
  const fs::path dir = fs::temp_directory_path() / "tilesense_unit_config";
  fs::remove_all(dir);
  fs::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "catalog.json") << to_json(default_catalog()).dump();
  std::ofstream(dir / "cfg.json") << R"({"version": 1, "catalog": "sub/catalog.json"})";
  const PipelineConfig c = load_config(dir / "cfg.json");
  EXPECT_EQ(c.catalog.size(), default_catalog().size());
  EXPECT_EQ(fs::path(c.catalog_path), dir / "sub" / "catalog.json");

  std::ofstream(dir / "broken.json") << "{";
  EXPECT_THROW(load_config(dir / "broken.json"), std::invalid_argument);
  EXPECT_THROW(load_config(dir / "absent.json"), std::runtime_error);
  fs::remove_all(dir);
}

TEST(Config, ShippedSampleLoads) {
  const PipelineConfig c = load_config(std::string(TILESENSE_DATA_DIR) + "/pipeline.json");
  EXPECT_EQ(to_json(c), to_json(PipelineConfig{}));
}

}  // namespace
}  // namespace tilesense
