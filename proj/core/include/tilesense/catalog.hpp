#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tilesense/geometry.hpp"

namespace tilesense {

using Rgb = std::array<std::uint8_t, 3>;

double color_distance(const Rgb& a, const Rgb& b);

struct TileSpec {
  std::string id;
  ShapeClass shape = ShapeClass::square;
  Rgb color{};
  double w = 1.0;  ///< pixels, model width at theta = 0
  double h = 1.0;  ///< pixels, model height at theta = 0

  SymmetryOrder symmetry() const { return symmetry_of(shape); }
};

/// Ordered, validated set of tile specs. Class ids used by the detector are
/// index + 1 (0 is background).
class Catalog {
 public:
  Catalog() = default;
  /// Throws std::invalid_argument when a spec or the set is invalid.
  explicit Catalog(std::vector<TileSpec> specs);

  const std::vector<TileSpec>& specs() const { return specs_; }
  std::size_t size() const { return specs_.size(); }
  bool empty() const { return specs_.empty(); }
  const TileSpec& operator[](std::size_t i) const { return specs_[i]; }

  /// Throws std::invalid_argument for an unknown id.
  const TileSpec& at(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;
  bool contains(std::string_view id) const;

  /// Smallest pairwise fill-color distance.
  double min_color_distance() const;

 private:
  std::vector<TileSpec> specs_;
};

/// Six-tile manipulative set: blue square, green rectangle, red right
/// triangle, yellow equilateral triangle, purple semicircle, dark-green
/// quarter circle.
const Catalog& default_catalog();

/// Border drawn around each tile, and its color factor relative to the fill.
inline constexpr double kBorderWidthPx = 2.0;
inline constexpr double kBorderShade = 0.6;

inline constexpr Rgb kPlaymatColor{215, 215, 208};

nlohmann::json to_json(const TileSpec& spec);
nlohmann::json to_json(const Catalog& catalog);
Catalog catalog_from_json(const nlohmann::json& j);
Catalog load_catalog(const std::string& path);

}  // namespace tilesense
