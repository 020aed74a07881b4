#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "tilesense/catalog.hpp"
#include "tilesense/compose.hpp"
#include "tilesense/encoding.hpp"
#include "tilesense/eval.hpp"
#include "tilesense/losses.hpp"
#include "tilesense/refdetect.hpp"

namespace tilesense {

struct BenchSettings {
  int iterations = 50;
  int warmup = 5;
  int images = 8;
  bool photometrics = false;
};

/// Everything the CLI and service need, loaded once at startup.
struct PipelineConfig {
  static constexpr int kVersion = 1;

  std::string catalog_path;  ///< empty = built-in catalog
  Catalog catalog = default_catalog();
  int width = 480;
  int height = 480;
  std::vector<int> strides{16, 32, 64};
  double anchor_side_factor = 1.25;
  LossConfig loss;
  DecodeConfig decode;
  DetectParams detect;
  compose::Tolerance compose;
  MatchConfig match;
  std::uint64_t scene_seed = 0;
  std::uint64_t negative_seed = 0;
  BenchSettings bench;

  std::vector<AnchorLevel> anchor_levels() const { return anchor_levels_for(strides, anchor_side_factor); }
  AnchorGrid anchor_grid() const;

  /// Throws std::invalid_argument (SchemaError where a field is to blame).
  void validate() const;
};

/// Strict parse: unknown fields are rejected, "version" must equal 1. A
/// relative catalog path is resolved against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& c);

}  // namespace tilesense
