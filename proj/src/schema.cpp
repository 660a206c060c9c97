// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/schema.hpp"

#include <algorithm>
#include <fstream>

#include "kbsynth/error.hpp"

namespace kbsynth {

std::string SchemaConfig::chain_key(std::string_view entityType, std::string_view attrName) const {
  std::string full = std::string(entityType) + "." + std::string(attrName);
  auto it = keyAliases.find(full);
  return it != keyAliases.end() ? it->second : std::string(attrName);
}

bool SchemaConfig::is_parent_forming(std::string_view key) const {
  return std::find(parentForming.begin(), parentForming.end(), key) != parentForming.end();
}

bool SchemaConfig::is_numeric_key(std::string_view key) const {
  return std::find(numericKeys.begin(), numericKeys.end(), key) != numericKeys.end();
}

SchemaConfig schema_from_json(const nlohmann::json& j) {
  SchemaConfig s;
  try {
    if (j.contains("parentForming")) s.parentForming = j.at("parentForming").get<std::vector<std::string>>();
    if (j.contains("keyedBy")) s.keyedBy = j.at("keyedBy").get<std::map<std::string, std::string>>();
    if (j.contains("keyAliases"))
      s.keyAliases = j.at("keyAliases").get<std::map<std::string, std::string>>();
    if (j.contains("numericKeys")) s.numericKeys = j.at("numericKeys").get<std::vector<std::string>>();
    s.autoNumeric = j.value("autoNumeric", s.autoNumeric);
    if (j.contains("scoping")) {
      for (const auto& r : j.at("scoping")) {
        ScopingRule rule;
        auto kind = r.at("kind").get<std::string>();
        if (kind == "sibling") {
          rule.kind = ScopingRule::Kind::Sibling;
        } else if (kind == "cross_level") {
          rule.kind = ScopingRule::Kind::CrossLevel;
        } else {
          throw Error(ErrorKind::ConfigError, "unknown scoping rule kind '" + kind + "'");
        }
        rule.key = r.at("key").get<std::string>();
        rule.lower = r.value("lower", "*");
        s.scoping.push_back(rule);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("schema: ") + e.what());
  }
  return s;
}

nlohmann::json schema_to_json(const SchemaConfig& s) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : s.scoping)
    rules.push_back({{"kind", r.kind == ScopingRule::Kind::Sibling ? "sibling" : "cross_level"},
                     {"key", r.key},
                     {"lower", r.lower}});
  return {{"parentForming", s.parentForming}, {"keyedBy", s.keyedBy},   {"keyAliases", s.keyAliases},
          {"numericKeys", s.numericKeys},     {"autoNumeric", s.autoNumeric}, {"scoping", rules}};
}

SchemaConfig load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  try {
    return schema_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

}  // namespace kbsynth
