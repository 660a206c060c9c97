// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/facts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "kbsynth/error.hpp"

namespace kbsynth {

namespace {

bool is_integer_text(std::string_view s) {
  std::size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
  if (i >= s.size()) return false;
  return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

bool is_decimal_text(std::string_view s) {
  auto dot = s.find('.');
  if (dot == std::string_view::npos || dot + 1 >= s.size()) return false;
  if (!is_integer_text(s.substr(0, dot))) return false;
  auto frac = s.substr(dot + 1);
  return std::all_of(frac.begin(), frac.end(), [](unsigned char c) { return std::isdigit(c); });
}

// A parsed term: either an atom (identifier, number, string, `_`) or a tuple.
struct Term {
  std::string atom;
  std::vector<Term> items;
  bool tuple = false;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ParseResult run() {
    ParseResult result;
    skip_space();
    while (pos_ < text_.size()) {
      std::size_t start = pos_;
      std::string head = identifier();
      if (head.empty()) fail("expected statement head");
      skip_space();
      std::vector<Term> args;
      if (peek() == '(') {
        ++pos_;
        args = term_list(')');
      }
      skip_space();
      expect('.');
      std::string statement(text_.substr(start, pos_ - start));
      if (head == "entity") {
        result.facts.push_back(entity(args, statement));
      } else if (head == "attribute") {
        result.facts.push_back(attribute(args, statement));
      } else {
        result.unknownStatements.push_back(std::move(statement));
      }
      skip_space();
    }
    return result;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::size_t line = 1 + static_cast<std::size_t>(
                               std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos_), '\n'));
    throw Error(ErrorKind::SyntaxError, what + " at line " + std::to_string(line));
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string number() {
    std::size_t start = pos_;
    if (peek() == '-') ++pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    // A '.' is part of the number only when a digit follows; otherwise it ends the statement.
    if (peek() == '.' && pos_ + 1 < text_.size() &&
        std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
      ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string quoted() {
    std::size_t start = pos_;
    ++pos_;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') ++pos_;
      ++pos_;
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  Term term() {
    skip_space();
    Term t;
    char c = peek();
    if (c == '(') {
      ++pos_;
      t.tuple = true;
      t.items = term_list(')');
      return t;
    }
    if (c == '"') {
      t.atom = quoted();
    } else if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      t.atom = number();
      if (t.atom == "-") fail("malformed number");
    } else {
      t.atom = identifier();
    }
    if (t.atom.empty()) fail("malformed term");
    return t;
  }

  std::vector<Term> term_list(char close) {
    std::vector<Term> items;
    skip_space();
    if (peek() == close) {
      ++pos_;
      return items;
    }
    while (true) {
      items.push_back(term());
      skip_space();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      expect(close);
      return items;
    }
  }

  static bool plain(const Term& t) { return !t.tuple; }

  Fact entity(const std::vector<Term>& args, const std::string& statement) {
    if (args.size() != 3 || !std::all_of(args.begin(), args.end(), plain))
      fail("malformed entity statement '" + statement + "'");
    Fact f;
    f.kind = FactKind::Entity;
    f.entityType = args[0].atom;
    f.parentId = args[1].atom;
    f.selfId = args[2].atom;
    return f;
  }

  Fact attribute(const std::vector<Term>& args, const std::string& statement) {
    if (args.size() != 3 || args[1].tuple || args[2].tuple)
      fail("malformed attribute statement '" + statement + "'");
    Fact f;
    f.kind = FactKind::Attribute;
    if (args[0].tuple) {
      if (args[0].items.size() != 2 || !plain(args[0].items[0]) || !plain(args[0].items[1]))
        fail("malformed attribute path in '" + statement + "'");
      f.entityType = args[0].items[0].atom;
      f.attrName = args[0].items[1].atom;
    } else {
      f.attrName = args[0].atom;
    }
    f.selfId = args[1].atom;
    f.value = Value::from_text(args[2].atom);
    return f;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

bool matches(const AstNode& node, const std::vector<Condition>& where) {
  return std::all_of(where.begin(), where.end(),
                     [&](const Condition& c) { return node.has(c.attr, c.value); });
}

void collect_descendants(const AstNode& node, const std::string& type,
                         const std::vector<Condition>& where, std::vector<const AstNode*>& out) {
  for (const auto& child : node.children) {
    if (child.entityType == type && matches(child, where)) out.push_back(&child);
    collect_descendants(child, type, where, out);
  }
}

void set_derived(AstNode& node, const DerivedRule& rule, Value value) {
  for (const auto& attr : node.attributes) {
    if (attr.name != rule.output) continue;
    if (attr.value == value) return;
    throw Error(ErrorKind::NameCollision,
                "derived rule '" + rule.name + "' would overwrite " + node.entityType + "." +
                    rule.output + "=" + attr.value.text + " with " + value.text);
  }
  node.attributes.push_back({rule.output, std::move(value)});
}

void apply_rule(AstNode& node, const DerivedRule& rule) {
  for (auto& child : node.children) apply_rule(child, rule);
  if (node.entityType != rule.scope) return;

  switch (rule.kind) {
    case DerivedKind::CountChildren:
    case DerivedKind::ExistsChild: {
      std::vector<const AstNode*> found;
      collect_descendants(node, rule.child, rule.where, found);
      if (rule.kind == DerivedKind::CountChildren) {
        set_derived(node, rule, Value::from_text(std::to_string(found.size())));
      } else {
        set_derived(node, rule, Value::from_text(found.empty() ? "false" : "true"));
      }
      break;
    }
    case DerivedKind::MapValue: {
      if (!matches(node, rule.where)) break;
      const Value* source = node.find(rule.source);
      if (source == nullptr) break;
      auto it = rule.mapping.find(source->text);
      if (it != rule.mapping.end()) set_derived(node, rule, Value::from_text(it->second));
      break;
    }
    case DerivedKind::Collocation: {
      std::map<std::string, int> owners;
      bool shared = false;
      for (const auto& child : node.children) {
        if (child.entityType != rule.child) continue;
        std::vector<const AstNode*> targets;
        if (child.entityType == rule.target && matches(child, rule.where)) targets.push_back(&child);
        collect_descendants(child, rule.target, rule.where, targets);
        std::set<std::string> keys;
        for (const auto* t : targets)
          for (const auto& attr : t->attributes)
            if (attr.name == rule.source) keys.insert(attr.value.text);
        for (const auto& k : keys)
          if (++owners[k] > 1) shared = true;
      }
      set_derived(node, rule, Value::from_text(shared ? "true" : "false"));
      break;
    }
  }
}

DerivedKind derived_kind_from(const std::string& s) {
  if (s == "CountChildren") return DerivedKind::CountChildren;
  if (s == "ExistsChild") return DerivedKind::ExistsChild;
  if (s == "MapValue") return DerivedKind::MapValue;
  if (s == "Collocation") return DerivedKind::Collocation;
  throw Error(ErrorKind::ConfigError, "unknown derived rule kind '" + s + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Value Value::from_text(std::string text) {
  Value v;
  if (is_integer_text(text)) {
    v.kind = ValueKind::Integer;
  } else if (is_decimal_text(text)) {
    v.kind = ValueKind::Decimal;
  }
  v.text = std::move(text);
  return v;
}

double Value::number() const { return is_numeric() ? std::stod(text) : 0.0; }

const Value* AstNode::find(std::string_view name) const {
  for (const auto& attr : attributes)
    if (attr.name == name) return &attr.value;
  return nullptr;
}

bool AstNode::has(std::string_view name, std::string_view value) const {
  return std::any_of(attributes.begin(), attributes.end(), [&](const Attribute& a) {
    return a.name == name && a.value.text == value;
  });
}

ParseResult parse_fact_program(std::string_view text) {
  ParseResult result = Parser(text).run();
  std::set<std::string> declared{std::string(kRootId)};
  for (const auto& f : result.facts)
    if (f.kind == FactKind::Entity) declared.insert(f.selfId);
  for (const auto& f : result.facts) {
    if (f.kind == FactKind::Attribute && !declared.count(f.selfId))
      throw Error(ErrorKind::DanglingReference,
                  "attribute " + f.attrName + " refers to undeclared entity '" + f.selfId + "'");
    if (f.kind == FactKind::Entity && f.parentId != kDummyId && !declared.count(f.parentId))
      throw Error(ErrorKind::DanglingReference,
                  "entity '" + f.selfId + "' has undeclared parent '" + f.parentId + "'");
  }
  return result;
}

DesignAst build_ast(const std::vector<Fact>& facts) {
  struct Pending {
    std::string type;
    std::string parent;
    bool dummy = false;
  };
  std::unordered_map<std::string, Pending> entities;
  std::vector<std::string> order;
  int explicitRoots = 0;

  for (const auto& f : facts) {
    if (f.kind != FactKind::Entity) continue;
    if (f.entityType == kRootId) {
      if (++explicitRoots > 1 || f.selfId != kRootId)
        throw Error(ErrorKind::MultipleRoots, "more than one root entity declared");
      continue;
    }
    if (f.selfId == kRootId)
      throw Error(ErrorKind::MultipleRoots, "entity '" + f.entityType + "' reuses the root id");
    if (f.selfId == kDummyId) throw Error(ErrorKind::SyntaxError, "entity id cannot be '_'");
    Pending p{f.entityType, f.parentId == kDummyId ? std::string(kRootId) : f.parentId,
              f.parentId == kDummyId};
    auto [it, inserted] = entities.emplace(f.selfId, p);
    if (!inserted) {
      if (it->second.type != p.type || it->second.parent != p.parent)
        throw Error(ErrorKind::SyntaxError, "entity id '" + f.selfId + "' declared twice");
      continue;
    }
    order.push_back(f.selfId);
  }

  for (const auto& id : order) {
    std::set<std::string> seen{id};
    std::string cur = entities.at(id).parent;
    while (cur != kRootId) {
      auto it = entities.find(cur);
      if (it == entities.end())
        throw Error(ErrorKind::DanglingReference, "entity '" + cur + "' is not declared");
      if (!seen.insert(cur).second)
        throw Error(ErrorKind::CycleError, "parent links of '" + id + "' form a cycle");
      cur = it->second.parent;
    }
  }

  std::unordered_map<std::string, std::vector<std::string>> kids;
  for (const auto& id : order) kids[entities.at(id).parent].push_back(id);

  std::unordered_map<std::string, std::vector<Attribute>> attrs;
  for (const auto& f : facts) {
    if (f.kind != FactKind::Attribute) continue;
    if (f.selfId != kRootId && !entities.count(f.selfId))
      throw Error(ErrorKind::DanglingReference,
                  "attribute " + f.attrName + " refers to undeclared entity '" + f.selfId + "'");
    attrs[f.selfId].push_back({f.attrName, *f.value});
  }

  std::function<void(AstNode&, const std::string&)> fill = [&](AstNode& node, const std::string& id) {
    node.attributes = attrs[id];
    std::map<std::string, int> ordinals;
    for (const auto& childId : kids[id]) {
      const auto& p = entities.at(childId);
      AstNode child;
      child.entityType = p.type;
      child.ordinal = ordinals[p.type]++;
      child.dummyParent = p.dummy;
      fill(child, childId);
      node.children.push_back(std::move(child));
    }
  };

  DesignAst ast;
  ast.root.entityType = std::string(kRootId);
  fill(ast.root, std::string(kRootId));
  return ast;
}

DesignAst parse_design(std::string_view text) { return build_ast(parse_fact_program(text).facts); }

std::string emit_facts(const DesignAst& ast) {
  std::ostringstream out;
  std::map<std::string, int> counters;
  std::function<void(const AstNode&, const std::string&)> emit = [&](const AstNode& node,
                                                                     const std::string& id) {
    for (const auto& attr : node.attributes)
      out << "attribute((" << node.entityType << ',' << attr.name << ")," << id << ','
          << attr.value.text << ").\n";
    for (const auto& child : node.children) {
      std::string childId = child.entityType + std::to_string(counters[child.entityType]++);
      out << "entity(" << child.entityType << ',' << (child.dummyParent ? std::string(kDummyId) : id)
          << ',' << childId << ").\n";
      emit(child, childId);
    }
  };
  emit(ast.root, std::string(kRootId));
  return out.str();
}

DerivedRule derived_rule_from_json(const nlohmann::json& j) {
  DerivedRule r;
  r.kind = derived_kind_from(j.at("kind").get<std::string>());
  r.scope = j.at("scope").get<std::string>();
  r.child = j.value("child", "");
  r.target = j.value("target", "");
  r.source = j.value("source", "");
  if (j.contains("where"))
    for (const auto& [k, v] : j.at("where").items())
      r.where.push_back({k, v.is_string() ? v.get<std::string>() : v.dump()});
  if (j.contains("mapping"))
    for (const auto& [k, v] : j.at("mapping").items()) r.mapping[k] = v.get<std::string>();
  switch (r.kind) {
    case DerivedKind::CountChildren: r.output = "n_" + r.child; break;
    case DerivedKind::ExistsChild: r.output = "has_" + r.child; break;
    case DerivedKind::MapValue: r.output = r.source + "_mapped"; break;
    case DerivedKind::Collocation: r.output = r.source + "_collocated"; break;
  }
  r.output = j.value("output", r.output);
  r.name = j.value("name", r.output);
  if (r.kind != DerivedKind::MapValue && r.child.empty())
    throw Error(ErrorKind::ConfigError, "derived rule '" + r.name + "' needs a child type");
  if (r.kind == DerivedKind::Collocation && (r.target.empty() || r.source.empty()))
    throw Error(ErrorKind::ConfigError, "collocation rule '" + r.name + "' needs target and source");
  if (r.kind == DerivedKind::MapValue && r.source.empty())
    throw Error(ErrorKind::ConfigError, "map rule '" + r.name + "' needs a source attribute");
  return r;
}

std::vector<DerivedRule> load_derived_rules(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  std::vector<DerivedRule> rules;
  for (const auto& item : j) rules.push_back(derived_rule_from_json(item));
  return rules;
}

DesignAst apply_derived_rules(const DesignAst& ast, const std::vector<DerivedRule>& rules) {
  DesignAst out = ast;
  for (const auto& rule : rules) apply_rule(out.root, rule);
  return out;
}

Corpus apply_derived_rules(const Corpus& corpus, const std::vector<DerivedRule>& rules) {
  Corpus out;
  out.pairs.reserve(corpus.size());
  for (const auto& p : corpus.pairs)
    out.pairs.push_back({apply_derived_rules(p.positive, rules), apply_derived_rules(p.negative, rules),
                         p.sourceTag, p.foldHint});
  return out;
}

Corpus parse_corpus_jsonl(std::string_view text) {
  Corpus corpus;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineNo = 0;
  auto join = [](const nlohmann::json& arr) {
    std::string program;
    for (const auto& s : arr) program += s.get<std::string>() + "\n";
    return program;
  };
  while (std::getline(in, line)) {
    ++lineNo;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    try {
      auto j = nlohmann::json::parse(line);
      DesignPair pair;
      pair.positive = parse_design(join(j.at("positive")));
      pair.negative = parse_design(join(j.at("negative")));
      pair.sourceTag = j.value("source", "");
      if (j.contains("fold") && !j.at("fold").is_null()) pair.foldHint = j.at("fold").get<int>();
      corpus.pairs.push_back(std::move(pair));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::SyntaxError, "corpus line " + std::to_string(lineNo) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), "corpus line " + std::to_string(lineNo) + ": " + e.what());
    }
  }
  if (corpus.pairs.empty()) throw Error(ErrorKind::DegenerateCorpus, "corpus has no pairs");
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus_jsonl(read_file(path)); }

}  // namespace kbsynth
