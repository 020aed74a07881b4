#include "tilesense/image.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace tilesense {

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw std::invalid_argument("image: negative size");
  rgb.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = fill[0];
    rgb[i + 1] = fill[1];
    rgb[i + 2] = fill[2];
  }
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("encode_png: empty image");
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width);
  desc.height = static_cast<png_uint_32>(img.height);
  desc.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, img.rgb.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("png: ") + desc.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, img.rgb.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("png: ") + desc.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw std::runtime_error("png: not a PNG stream");
  }
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size())) {
    throw std::runtime_error(std::string("png: ") + desc.message);
  }
  desc.format = PNG_FORMAT_RGB;
  Image img(static_cast<int>(desc.width), static_cast<int>(desc.height));
  const png_color background{255, 255, 255};
  if (!png_image_finish_read(&desc, &background, img.rgb.data(), 0, nullptr)) {
    png_image_free(&desc);
    throw std::runtime_error(std::string("png: ") + desc.message);
  }
  return img;
}

void write_png(const Image& img, const std::string& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

Image read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

}  // namespace tilesense
