// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace kbsynth {

/// Combination scoping beyond "same membership, same parents".
///   Sibling     components may differ in their last parent segment when its key is `key`
///               (e.g. channel.x vs channel.y under one mark).
///   CrossLevel  a chain whose terminal key is `key` may pair with a lower-level chain
///               (terminal key `lower`, or any when "*") whose membership and parents extend it.
struct ScopingRule {
  enum class Kind { Sibling, CrossLevel };
  Kind kind = Kind::Sibling;
  std::string key;
  std::string lower = "*";
};

struct SchemaConfig {
  /// Chain keys folded into descendants' parent segments.
  std::vector<std::string> parentForming{"mark_type", "channel"};
  /// Entity types identified by an attribute instead of an ordinal in membership.
  std::map<std::string, std::string> keyedBy{{"encoding", "channel"}, {"scale", "channel"}};
  /// "entity.attr" -> chain key; unlisted attributes use their own name.
  std::map<std::string, std::string> keyAliases{{"mark.type", "mark_type"}, {"scale.type", "scale_type"}};
  /// Terminal keys always bucketed; with autoNumeric, any key whose values are all numeric is too.
  std::vector<std::string> numericKeys;
  bool autoNumeric = true;
  std::vector<ScopingRule> scoping;

  std::string chain_key(std::string_view entityType, std::string_view attrName) const;
  bool is_parent_forming(std::string_view key) const;
  bool is_numeric_key(std::string_view key) const;
};

SchemaConfig schema_from_json(const nlohmann::json& j);
nlohmann::json schema_to_json(const SchemaConfig& schema);
SchemaConfig load_schema(const std::filesystem::path& path);

}  // namespace kbsynth
