#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace tilesense {

/// Schema violation with the offending field path, e.g. "tiles[2].cx".
class SchemaError : public std::invalid_argument {
 public:
  SchemaError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

namespace json_util {

inline std::string join(std::string_view path, std::string_view key) {
  if (path.empty()) return std::string(key);
  return std::string(path) + "." + std::string(key);
}

inline std::string index(std::string_view path, std::size_t i) {
  return std::string(path) + "[" + std::to_string(i) + "]";
}

inline void require_object(const nlohmann::json& j, std::string_view path) {
  if (!j.is_object()) throw SchemaError(path.empty() ? "$" : std::string(path), "expected an object");
}

inline void reject_unknown(const nlohmann::json& j, std::string_view path,
                           std::initializer_list<std::string_view> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || it.key() == a;
    if (!ok) throw SchemaError(join(path, it.key()), "unknown field");
  }
}

inline const nlohmann::json& field(const nlohmann::json& j, std::string_view path, std::string_view key) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(join(path, key), "missing required field");
  return *it;
}

inline double number(const nlohmann::json& j, std::string_view path, std::string_view key) {
  const auto& v = field(j, path, key);
  if (!v.is_number()) throw SchemaError(join(path, key), "expected a number");
  return v.get<double>();
}

inline double number_or(const nlohmann::json& j, std::string_view path, std::string_view key, double dflt) {
  if (!j.contains(key) || j.at(key).is_null()) return dflt;
  return number(j, path, key);
}

inline long long integer(const nlohmann::json& j, std::string_view path, std::string_view key) {
  const auto& v = field(j, path, key);
  if (!v.is_number_integer()) throw SchemaError(join(path, key), "expected an integer");
  return v.get<long long>();
}

inline std::string string(const nlohmann::json& j, std::string_view path, std::string_view key) {
  const auto& v = field(j, path, key);
  if (!v.is_string()) throw SchemaError(join(path, key), "expected a string");
  return v.get<std::string>();
}

inline bool boolean_or(const nlohmann::json& j, std::string_view path, std::string_view key, bool dflt) {
  if (!j.contains(key)) return dflt;
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw SchemaError(join(path, key), "expected a boolean");
  return v.get<bool>();
}

inline const nlohmann::json& array(const nlohmann::json& j, std::string_view path, std::string_view key) {
  const auto& v = field(j, path, key);
  if (!v.is_array()) throw SchemaError(join(path, key), "expected an array");
  return v;
}

}  // namespace json_util
}  // namespace tilesense
