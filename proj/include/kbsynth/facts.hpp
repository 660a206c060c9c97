// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace kbsynth {

inline constexpr std::string_view kRootId = "root";
inline constexpr std::string_view kDummyId = "_";

enum class ValueKind { Symbol, Integer, Decimal };

/// Attribute value typed by lexical shape. `text` is the literal as written.
struct Value {
  ValueKind kind = ValueKind::Symbol;
  std::string text;

  static Value from_text(std::string text);
  bool is_numeric() const { return kind != ValueKind::Symbol; }
  double number() const;

  friend bool operator==(const Value&, const Value&) = default;
};

enum class FactKind { Entity, Attribute };

struct Fact {
  FactKind kind = FactKind::Entity;
  std::string entityType;  // empty for bare-name attributes, e.g. attribute(rows,root,3)
  std::string attrName;
  std::string parentId;    // entities only; may be "root" or "_"
  std::string selfId;
  std::optional<Value> value;

  friend bool operator==(const Fact&, const Fact&) = default;
};

struct ParseResult {
  std::vector<Fact> facts;
  /// Statements whose head is neither `entity` nor `attribute`.
  std::vector<std::string> unknownStatements;
};

/// Parses `entity/3` and `attribute/3` statements with `%` comments.
/// Throws Error{SyntaxError} or Error{DanglingReference}.
ParseResult parse_fact_program(std::string_view text);

struct Attribute {
  std::string name;
  Value value;

  friend bool operator==(const Attribute&, const Attribute&) = default;
};

struct AstNode {
  std::string entityType;
  int ordinal = 0;
  bool dummyParent = false;
  std::vector<Attribute> attributes;
  std::vector<AstNode> children;

  /// First value of `name`, if any.
  const Value* find(std::string_view name) const;
  bool has(std::string_view name, std::string_view value) const;

  friend bool operator==(const AstNode&, const AstNode&) = default;
};

/// The root node has entityType "root"; top-level entities hang below it.
struct DesignAst {
  AstNode root;

  friend bool operator==(const DesignAst&, const DesignAst&) = default;
};

DesignAst build_ast(const std::vector<Fact>& facts);
DesignAst parse_design(std::string_view text);

/// Emits the tree back as a fact program with generated identifiers.
std::string emit_facts(const DesignAst& ast);

enum class DerivedKind { CountChildren, ExistsChild, MapValue, Collocation };

struct Condition {
  std::string attr;
  std::string value;
};

/// A-priori knowledge expressed as an attribute-adding rule.
///
///   CountChildren  scope.output = number of `child` descendants matching `where`
///   ExistsChild    scope.output = true/false for the same test
///   MapValue       scope.output = mapping[scope.source] when scope matches `where`
///   Collocation    scope.output = true when two `child` entities both contain a
///                  `target` descendant matching `where` with equal `source` values
struct DerivedRule {
  std::string name;
  DerivedKind kind = DerivedKind::CountChildren;
  std::string scope;
  std::string child;
  std::string target;
  std::string source;
  std::vector<Condition> where;
  std::map<std::string, std::string> mapping;
  std::string output;
};

DerivedRule derived_rule_from_json(const nlohmann::json& j);
std::vector<DerivedRule> load_derived_rules(const std::filesystem::path& path);

/// Throws Error{NameCollision} when an output attribute already holds a different value.
DesignAst apply_derived_rules(const DesignAst& ast, const std::vector<DerivedRule>& rules);

struct DesignPair {
  DesignAst positive;
  DesignAst negative;
  std::string sourceTag;
  /// Fold index in [0, folds); -1 pins the pair to the holdout set.
  std::optional<int> foldHint;
};

struct Corpus {
  std::vector<DesignPair> pairs;

  std::size_t size() const { return pairs.size(); }
  /// Design 2i is pair i's positive design, 2i+1 its negative one.
  const DesignAst& design(std::size_t index) const {
    const auto& pair = pairs[index / 2];
    return index % 2 == 0 ? pair.positive : pair.negative;
  }
};

/// JSON-lines corpus: {"positive": [...], "negative": [...], "source": s, "fold": k}.
Corpus parse_corpus_jsonl(std::string_view text);
Corpus load_corpus(const std::filesystem::path& path);

Corpus apply_derived_rules(const Corpus& corpus, const std::vector<DerivedRule>& rules);

}  // namespace kbsynth
