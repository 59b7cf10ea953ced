#ifndef SCANFILL_CONFIG_HPP
#define SCANFILL_CONFIG_HPP

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "scanfill/tensor.hpp"

namespace scanfill {

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
  if (!j.is_object())
    throw std::runtime_error("config " + path + ": top level must be an object");
  return j;
}

// Strict key check: any key outside `allowed` is a hard error, all offenders
// listed at once so typos surface in a single pass.
inline void require_known_keys(const nlohmann::json& obj,
                               const std::string& context,
                               const std::set<std::string>& allowed) {
  if (!obj.is_object())
    throw std::runtime_error(context + " must be a JSON object");
  std::string offenders;
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) offenders += (offenders.empty() ? "" : ", ") + key;
  if (!offenders.empty())
    throw std::runtime_error("unknown config key(s) in " + context + ": " +
                             offenders);
}

template <typename T>
T config_get(const nlohmann::json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("config key '" + key + "' has the wrong type");
  }
}

template <typename T>
T config_require(const nlohmann::json& obj, const std::string& key,
                 const std::string& context) {
  if (!obj.contains(key))
    throw std::runtime_error("missing required config key '" + key + "' in " +
                             context);
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("config key '" + key + "' has the wrong type");
  }
}

}  // namespace scanfill

#endif  // SCANFILL_CONFIG_HPP
