#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "tilesense/encoding.hpp"

namespace tilesense {

namespace {

constexpr const char* kLayout = "class|orientation|offsets";
constexpr const char* kDtype = "f32le";

std::string header_line(const PredictionTensor& p, std::optional<std::size_t> offset) {
  nlohmann::ordered_json h;
  h["anchors"] = p.anchors();
  h["classes"] = p.classes();
  h["bins"] = p.bins();
  h["layout"] = kLayout;
  h["dtype"] = kDtype;
  if (offset) h["offset"] = *offset;
  return h.dump() + "\n";
}

std::string encode_blob(const std::vector<double>& data) {
  std::string out(data.size() * 4, '\0');
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(data[i]));
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<char>((u >> (8 * b)) & 0xFF);
  }
  return out;
}

void decode_blob(const char* bytes, std::vector<double>& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    const float f = std::bit_cast<float>(u);
    if (!std::isfinite(f)) throw std::runtime_error("prediction tensor contains non-finite value at " + std::to_string(i));
    data[i] = f;
  }
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::size_t header_count(const nlohmann::json& h, const char* key) {
  auto it = h.find(key);
  if (it == h.end() || !it->is_number_unsigned()) {
    throw std::runtime_error(std::string("prediction header: '") + key + "' must be a non-negative integer");
  }
  return it->get<std::size_t>();
}

}  // namespace

void save_predictions(const PredictionTensor& pred, const std::filesystem::path& path, bool concatenated) {
  const std::string blob = encode_blob(pred.data());
  if (!concatenated) {
    write_all(path, header_line(pred, std::nullopt));
    std::filesystem::path bin = path;
    write_all(bin.replace_extension(".bin"), blob);
    return;
  }
  // The offset is part of the header, so iterate until its digit count settles.
  std::size_t offset = 0;
  std::string header;
  do {
    header = header_line(pred, offset);
    if (header.size() == offset) break;
    offset = header.size();
  } while (true);
  write_all(path, header + blob);
}

PredictionTensor load_predictions(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const std::size_t eol = bytes.find('\n');
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, eol));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("prediction header is not valid JSON: " + std::string(e.what()));
  }
  if (!h.is_object()) throw std::runtime_error("prediction header must be a JSON object");
  const std::size_t anchors = header_count(h, "anchors");
  const std::size_t classes = header_count(h, "classes");
  const std::size_t bins = header_count(h, "bins");
  if (h.value("layout", std::string()) != kLayout) {
    throw std::runtime_error(std::string("prediction header: layout must be \"") + kLayout + "\"");
  }
  if (h.value("dtype", std::string()) != kDtype) {
    throw std::runtime_error(std::string("prediction header: dtype must be \"") + kDtype + "\"");
  }
  if (classes == 0 || bins == 0) throw std::runtime_error("prediction header: classes and bins must be positive");

  PredictionTensor p(anchors, classes, bins);
  const std::size_t need = p.data().size() * 4;

  if (h.contains("offset")) {
    const std::size_t offset = header_count(h, "offset");
    if (offset > bytes.size() || bytes.size() - offset < need) {
      throw std::runtime_error("prediction blob truncated: need " + std::to_string(need) + " bytes at offset " +
                               std::to_string(offset) + ", file has " + std::to_string(bytes.size()));
    }
    if (bytes.size() - offset > need) throw std::runtime_error("prediction blob has trailing bytes");
    decode_blob(bytes.data() + offset, p.data());
    return p;
  }

  std::filesystem::path bin = path;
  bin.replace_extension(".bin");
  const std::string blob = read_all(bin);
  if (blob.size() < need) {
    throw std::runtime_error("prediction blob truncated: need " + std::to_string(need) + " bytes, " + bin.string() +
                             " has " + std::to_string(blob.size()));
  }
  if (blob.size() > need) throw std::runtime_error("prediction blob has trailing bytes");
  decode_blob(blob.data(), p.data());
  return p;
}

}  // namespace tilesense
