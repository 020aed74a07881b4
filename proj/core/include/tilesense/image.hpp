#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tilesense/catalog.hpp"

namespace tilesense {

/// Interleaved 8-bit RGB raster, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, Rgb fill = {0, 0, 0});

  std::uint8_t* px(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* px(int x, int y) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
  Rgb at(int x, int y) const {
    const std::uint8_t* p = px(x, y);
    return {p[0], p[1], p[2]};
  }
  friend bool operator==(const Image&, const Image&) = default;
};

std::vector<std::uint8_t> encode_png(const Image& img);
/// Accepts 8-bit gray/RGB/RGBA PNGs; alpha is dropped. Throws std::runtime_error.
Image decode_png(std::span<const std::uint8_t> bytes);

void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

}  // namespace tilesense
