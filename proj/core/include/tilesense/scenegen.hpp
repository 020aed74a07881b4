#pragma once

// Synthetic bird's-eye-view scenes: sampling, rendering and exact labels.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tilesense/catalog.hpp"
#include "tilesense/compose.hpp"
#include "tilesense/geometry.hpp"
#include "tilesense/image.hpp"

namespace tilesense::scenegen {

/// Tile placement before the global jitter. w and h of `pose` are taken from
/// the spec.
struct TilePose {
  std::string spec_id;
  OrientedBox pose;
};

/// Darkening ellipse; pixels are scaled by (1 - strength * falloff).
struct Shadow {
  double cx = 0.0;
  double cy = 0.0;
  double rx = 1.0;
  double ry = 1.0;
  double angle_deg = 0.0;
  double strength = 0.0;  ///< [0, 1)
};

struct Photometrics {
  double brightness_gain = 1.0;
  double gamma = 1.0;
  double noise_sigma = 0.0;  ///< 8-bit units
  std::optional<Shadow> shadow;

  bool is_identity() const {
    return brightness_gain == 1.0 && gamma == 1.0 && noise_sigma == 0.0 && !shadow;
  }
};

struct CompositionInfo {
  std::string template_id;
  std::vector<std::size_t> alternatives;  ///< chosen alternative per group
};

struct SceneSpec {
  int width = 480;
  int height = 480;
  std::vector<TilePose> tiles;
  Photometrics photometrics;
  Similarity global_jitter;  ///< origin is the image center
  std::uint64_t rng_seed = 0;
  std::optional<CompositionInfo> composition;
};

template <typename T>
struct Range {
  T lo{};
  T hi{};
};

struct PhotometricRanges {
  Range<double> gain{0.7, 1.3};
  Range<double> gamma{0.8, 1.25};
  Range<double> noise_sigma{0.0, 10.0};
  double shadow_probability = 0.0;
  Range<double> shadow_strength{0.15, 0.35};

  static PhotometricRanges none() {
    return {{1.0, 1.0}, {1.0, 1.0}, {0.0, 0.0}, 0.0, {0.0, 0.0}};
  }
};

struct JitterRanges {
  Range<double> scale{0.9, 1.1};
  Range<double> rotation_deg{-15.0, 15.0};
  double max_translation = 10.0;

  static JitterRanges none() { return {{1.0, 1.0}, {0.0, 0.0}, 0.0}; }
};

struct SceneConfig {
  Catalog catalog = default_catalog();
  int width = 480;
  int height = 480;
  int max_tiles = 8;
  PhotometricRanges photometrics;
  JitterRanges jitter;
  /// Probability that a tile is proposed next to an already placed one.
  double snug_probability = 0.7;
  int max_retries = 200;

  /// No photometric variation, no global jitter.
  static SceneConfig clean();
};

/// Pairwise overlap limit, as a fraction of the smaller tile's area.
inline constexpr double kMaxOverlapFraction = 0.01;

/// Rejection-sampled scene with 1..max_tiles tiles. Deterministic for a seed.
/// Tiles that cannot be placed within max_retries are dropped.
SceneSpec sample_scene(std::uint64_t seed, const SceneConfig& config);

struct CompositionJitter {
  double pos_sigma = 0.0;    ///< pixels
  double theta_sigma = 0.0;  ///< degrees
};

/// Tiles of a registered template, under a random rigid placement plus
/// per-tile Gaussian jitter. `alternatives`, when given, forces the choice per
/// group. Global jitter keeps scale 1. Throws std::out_of_range for an unknown
/// template.
SceneSpec sample_composition(const std::string& template_id, const CompositionJitter& jitter, std::uint64_t seed,
                             const compose::TemplateRegistry& registry, const SceneConfig& config,
                             const std::optional<std::vector<std::size_t>>& alternatives = std::nullopt);

/// Tile polygon after the global jitter.
Polygon tile_polygon(const SceneSpec& scene, const TilePose& tile, const Catalog& catalog);

/// Checks in-bounds and pairwise-overlap invariants.
bool scene_is_valid(const SceneSpec& scene, const Catalog& catalog);

/// 4x4 supersampled fill with a 2 px border at 60% of the fill color over the
/// playmat, then gain, gamma, shadow and noise. The global jitter is applied
/// to tile geometry before filling.
Image rasterize(const SceneSpec& scene, const Catalog& catalog);

struct TileAnnotation {
  std::string spec_id;
  ShapeClass shape = ShapeClass::square;
  double cx = 0.0;
  double cy = 0.0;
  double theta_deg = 0.0;  ///< canonical modulo the shape's symmetry
  int orientation_bin = 0;
  double scale = 1.0;      ///< global jitter scale
  AxisBox aabb;
  Polygon vertices;

  OrientedBox pose(const Catalog& catalog) const;
};

std::vector<TileAnnotation> annotate(const SceneSpec& scene, const Catalog& catalog,
                                     const OrientationBins& bins = OrientationBins{});

enum class DatasetMode { random, compositions, mixed };
DatasetMode dataset_mode_from_string(std::string_view s);
std::string_view to_string(DatasetMode m);

struct ManifestEntry {
  std::string image_path;  ///< relative to the dataset root
  std::string annotation_path;
  std::string scene_path;
  std::string error;       ///< empty on success
};

struct DatasetManifest {
  int version = 1;
  std::uint64_t seed = 0;
  std::string mode;
  std::vector<ManifestEntry> entries;

  std::size_t count() const { return entries.size(); }
  std::size_t failures() const;
};

struct DatasetOptions {
  SceneConfig scene;
  CompositionJitter composition_jitter{1.0, 1.0};
  unsigned threads = 0;  ///< 0 = hardware concurrency
};

/// Writes images/, annotations/, scenes/ and manifest.json under `out_dir`.
/// Scene i uses derive_seed(seed, i). Throws std::runtime_error if `out_dir`
/// cannot be created; per-entry write failures are recorded in the entry.
DatasetManifest generate_dataset(std::size_t n, std::uint64_t seed, const std::filesystem::path& out_dir,
                                 DatasetMode mode, const DatasetOptions& options = {},
                                 const compose::TemplateRegistry& registry = compose::default_registry());

nlohmann::json to_json(const SceneSpec& scene);
/// Strict parse; throws SchemaError naming the offending field.
SceneSpec scene_from_json(const nlohmann::json& j, const Catalog& catalog);

nlohmann::json to_json(const TileAnnotation& a);
nlohmann::json annotation_to_json(const std::string& image, int width, int height,
                                  const std::vector<TileAnnotation>& tiles);
/// Parses an annotation file body; returns tiles and (width, height).
std::vector<TileAnnotation> annotations_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DatasetManifest& m);

/// Serializes with sorted keys and a trailing newline.
std::string dump_stable(const nlohmann::json& j);

}  // namespace tilesense::scenegen
