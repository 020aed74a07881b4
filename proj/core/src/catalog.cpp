#include "tilesense/catalog.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace tilesense {

double color_distance(const Rgb& a, const Rgb& b) {
  const double dr = double(a[0]) - b[0];
  const double dg = double(a[1]) - b[1];
  const double db = double(a[2]) - b[2];
  return std::sqrt(dr * dr + dg * dg + db * db);
}

Catalog::Catalog(std::vector<TileSpec> specs) : specs_(std::move(specs)) {
  std::set<std::string> ids;
  for (const TileSpec& s : specs_) {
    if (s.id.empty()) throw std::invalid_argument("tile spec with empty id");
    if (!ids.insert(s.id).second) throw std::invalid_argument("duplicate tile spec id: " + s.id);
    if (!(s.w > 0.0) || !(s.h > 0.0) || !std::isfinite(s.w) || !std::isfinite(s.h)) {
      throw std::invalid_argument("tile spec " + s.id + ": sizes must be positive");
    }
    if (s.shape == ShapeClass::square && std::abs(s.w - s.h) > 1e-9) {
      throw std::invalid_argument("tile spec " + s.id + ": square needs w == h");
    }
    if (s.shape == ShapeClass::equilateral_triangle &&
        std::abs(s.h - s.w * std::sqrt(3.0) / 2.0) > 1e-6 * s.w) {
      throw std::invalid_argument("tile spec " + s.id + ": equilateral triangle needs h = w*sqrt(3)/2");
    }
  }
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    for (std::size_t j = i + 1; j < specs_.size(); ++j) {
      if (color_distance(specs_[i].color, specs_[j].color) < 60.0) {
        throw std::invalid_argument("tile specs " + specs_[i].id + " and " + specs_[j].id +
                                    " have colors closer than 60");
      }
    }
  }
}

const TileSpec& Catalog::at(std::string_view id) const { return specs_[index_of(id)]; }

std::size_t Catalog::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].id == id) return i;
  }
  throw std::invalid_argument("unknown tile spec: " + std::string(id));
}

bool Catalog::contains(std::string_view id) const {
  for (const TileSpec& s : specs_) {
    if (s.id == id) return true;
  }
  return false;
}

double Catalog::min_color_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    for (std::size_t j = i + 1; j < specs_.size(); ++j) {
      best = std::min(best, color_distance(specs_[i].color, specs_[j].color));
    }
  }
  return best;
}

const Catalog& default_catalog() {
  static const Catalog catalog{{
      {"square_blue", ShapeClass::square, {40, 90, 210}, 70.0, 70.0},
      {"rect_green", ShapeClass::rectangle, {110, 200, 60}, 100.0, 50.0},
      {"tri_red", ShapeClass::right_triangle, {215, 45, 45}, 80.0, 80.0},
      {"tri_yellow", ShapeClass::equilateral_triangle, {235, 200, 40}, 80.0, 40.0 * std::sqrt(3.0)},
      {"semi_purple", ShapeClass::semicircle, {150, 70, 190}, 100.0, 50.0},
      {"quarter_darkgreen", ShapeClass::quarter_circle, {15, 105, 70}, 70.0, 70.0},
  }};
  return catalog;
}

nlohmann::json to_json(const TileSpec& spec) {
  return {
      {"id", spec.id},
      {"shape", std::string(to_string(spec.shape))},
      {"color", {spec.color[0], spec.color[1], spec.color[2]}},
      {"w", spec.w},
      {"h", spec.h},
      {"symmetry", spec.symmetry().k},
  };
}

nlohmann::json to_json(const Catalog& catalog) {
  nlohmann::json arr = nlohmann::json::array();
  for (const TileSpec& s : catalog.specs()) arr.push_back(to_json(s));
  return arr;
}

Catalog catalog_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("catalog: expected an array of tile specs");
  std::vector<TileSpec> specs;
  for (const auto& e : j) {
    TileSpec s;
    s.id = e.at("id").get<std::string>();
    s.shape = shape_from_string(e.at("shape").get<std::string>());
    const auto& c = e.at("color");
    if (!c.is_array() || c.size() != 3) throw std::invalid_argument("catalog: color must be [r,g,b]");
    for (int k = 0; k < 3; ++k) {
      const int v = c[k].get<int>();
      if (v < 0 || v > 255) throw std::invalid_argument("catalog: color channel out of range");
      s.color[k] = static_cast<std::uint8_t>(v);
    }
    s.w = e.at("w").get<double>();
    s.h = e.at("h").get<double>();
    specs.push_back(std::move(s));
  }
  return Catalog(std::move(specs));
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open catalog file: " + path);
  return catalog_from_json(nlohmann::json::parse(in));
}

}  // namespace tilesense
