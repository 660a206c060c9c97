// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "kbsynth/error.hpp"
#include "kbsynth/io.hpp"

namespace kbsynth {

namespace {

bool is_plain_symbol(std::string_view s) {
  if (s.empty() || !std::islower(static_cast<unsigned char>(s.front()))) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

bool is_integer_text(std::string_view s) {
  std::size_t i = !s.empty() && s.front() == '-' ? 1 : 0;
  return i < s.size() && std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(),
                                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::string asp_term(std::string_view value) {
  if (is_plain_symbol(value) || is_integer_text(value)) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string segments_key(const std::vector<ChainSegment>& segs, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n && i < segs.size(); ++i) out += segs[i].key + "=" + segs[i].value + "/";
  return out;
}

struct Scope {
  std::map<std::string, std::string> vars;
  std::vector<std::string> atoms;
  std::set<std::string> seen;
  std::vector<std::string> entityVars;
  std::map<char, int> counters;
  int numbers = 0;

  void add(std::string atom) {
    if (seen.insert(atom).second) atoms.push_back(std::move(atom));
  }

  std::string entity(const std::string& identity, const std::string& type, const std::string& parent) {
    auto it = vars.find(identity);
    if (it != vars.end()) return it->second;
    char initial = static_cast<char>(std::toupper(static_cast<unsigned char>(type.empty() ? 'x' : type.front())));
    if (!std::isalpha(static_cast<unsigned char>(initial))) initial = 'X';
    std::string var = std::string(1, initial) + std::to_string(counters[initial]++);
    vars.emplace(identity, var);
    add("entity(" + asp_term(type) + "," + parent + "," + var + ")");
    entityVars.push_back(var);
    return var;
  }
};

struct ChainRenderer {
  const RenderContext& ctx;

  bool child_of(const std::string& type, const std::string& parentType) const {
    auto it = ctx.registry.parentTypes.find(type);
    return it != ctx.registry.parentTypes.end() && it->second.count(parentType);
  }

  const std::set<KeyHome>& homes(const std::string& key) const {
    auto it = ctx.registry.homes.find(key);
    if (it == ctx.registry.homes.end() || it->second.empty())
      throw Error(ErrorKind::UnrenderableChain, "no entity/attribute home for chain key '" + key + "'");
    return it->second;
  }

  std::string terminal_value_atoms(Scope& scope, const KeyHome& home, const std::string& var,
                                   const ChainSegment& terminal) const {
    const std::string head = "attribute((" + asp_term(home.entityType) + "," + asp_term(home.attrName) + ")," + var + ",";
    auto b = ctx.boundaries.find(terminal.key);
    if (b != ctx.boundaries.end() && !b->second.cutpoints.empty()) {
      const auto& cuts = b->second.cutpoints;
      for (std::size_t i = 0; i <= cuts.size(); ++i) {
        const double representative = i == 0 ? cuts.front() - 1.0 : cuts[i - 1];
        if (b->second.label(representative) != terminal.value) continue;
        const std::string n = "N" + std::to_string(scope.numbers++);
        scope.add(head + n + ")");
        if (i > 0) scope.add(n + ">=" + format_double(cuts[i - 1]));
        if (i < cuts.size()) scope.add(n + "<" + format_double(cuts[i]));
        return var;
      }
    }
    scope.add(head + asp_term(terminal.value) + ")");
    return var;
  }

  std::string membership(Scope& scope, const std::vector<ChainSegment>& m) const {
    std::string var = "_";
    for (std::size_t i = 0; i < m.size(); ++i) var = scope.entity("m:" + segments_key(m, i + 1), m[i].key, var);
    return var;
  }

  // Adds the atoms of a positive chain; returns the variable of the entity holding the terminal.
  std::string render(Scope& scope, const KeyValueChain& chain) const {
    std::vector<std::pair<std::string, std::string>> bound;  // (type, var), outermost first
    std::string parentVar = "_";
    for (std::size_t i = 0; i < chain.membership.size(); ++i) {
      const auto& seg = chain.membership[i];
      parentVar = scope.entity("m:" + segments_key(chain.membership, i + 1), seg.key, parentVar);
      bound.emplace_back(seg.key, parentVar);
    }
    const std::string lastType = bound.empty() ? "" : bound.back().first;
    const bool existence = chain.terminal.value.empty();

    const auto& hostHomes = homes(chain.terminal.key);
    KeyHome host = *hostHomes.begin();
    for (const auto& h : hostHomes) {
      if (!lastType.empty() && h.entityType == lastType && !existence) {
        host = h;
        break;
      }
      if (!lastType.empty() && child_of(h.entityType, lastType)) host = h;
    }

    const std::string scopeKey = segments_key(chain.membership, chain.membership.size()) + "|";
    std::vector<std::pair<KeyHome, const ChainSegment*>> onHost;
    for (std::size_t i = 0; i < chain.parents.size(); ++i) {
      const auto& seg = chain.parents[i];
      const auto& hs = homes(seg.key);
      std::optional<std::pair<KeyHome, std::string>> target;
      for (auto b = bound.rbegin(); b != bound.rend() && !target; ++b)
        for (const auto& h : hs)
          if (h.entityType == b->first && !h.attrName.empty()) {
            target = {{h, b->second}};
            break;
          }
      if (!target) {
        auto onHostHome = std::find_if(hs.begin(), hs.end(), [&](const KeyHome& h) {
          return h.entityType == host.entityType && !h.attrName.empty() && !existence;
        });
        if (onHostHome != hs.end()) {
          onHost.emplace_back(*onHostHome, &seg);
          continue;
        }
        const KeyHome& h = *hs.begin();
        if (h.attrName.empty()) throw Error(ErrorKind::UnrenderableChain, "parent key '" + seg.key + "' is not an attribute");
        const std::string parent = !bound.empty() && child_of(h.entityType, bound.back().first) ? bound.back().second : "_";
        const std::string var = scope.entity("h:" + scopeKey + segments_key(chain.parents, i + 1) + h.entityType,
                                             h.entityType, parent);
        bound.emplace_back(h.entityType, var);
        target = {{h, var}};
      }
      scope.add("attribute((" + asp_term(target->first.entityType) + "," + asp_term(target->first.attrName) + ")," +
                target->second + "," + asp_term(seg.value) + ")");
    }

    std::string hostVar;
    if (!existence && !bound.empty() && bound.back().first == host.entityType && onHost.empty()) {
      hostVar = bound.back().second;
    } else {
      const std::string parent = !bound.empty() && child_of(host.entityType, bound.back().first) ? bound.back().second : "_";
      std::string identity = "h:" + scopeKey + segments_key(chain.parents, chain.parents.size());
      if (existence)
        identity += host.entityType + "#";
      else if (ctx.schema.is_parent_forming(chain.terminal.key))
        identity += segments_key({chain.terminal}, 1) + host.entityType;
      else
        identity += host.entityType;
      hostVar = scope.entity(identity, host.entityType, parent);
    }
    for (const auto& [h, seg] : onHost)
      scope.add("attribute((" + asp_term(h.entityType) + "," + asp_term(h.attrName) + ")," + hostVar + "," +
                asp_term(seg->value) + ")");
    if (!existence) terminal_value_atoms(scope, host, hostVar, chain.terminal);
    return hostVar;
  }
};

std::string sanitize(std::string_view s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u))
      out += static_cast<char>(std::tolower(u));
    else if (!out.empty() && out.back() != '_')
      out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::string describe(const KeyValueChain& c) {
  std::string s = c.terminal.value.empty() ? "having " + c.terminal.key
                                           : "using " + c.terminal.value + " " + c.terminal.key;
  if (!c.parents.empty()) {
    std::string p;
    for (const auto& seg : c.parents) p += (p.empty() ? "" : " ") + seg.value + " " + seg.key;
    s += " for " + p;
  }
  if (c.negated) s += " (avoided)";
  return s;
}

GroundingLevel level_from_string(const std::string& s) {
  if (s == "grounded") return GroundingLevel::Grounded;
  if (s == "membership_stripped") return GroundingLevel::MembershipStripped;
  if (s == "parent_stripped") return GroundingLevel::ParentStripped;
  throw Error(ErrorKind::SyntaxError, "unknown grounding level '" + s + "'");
}

long long integer_weight(double w) { return std::llround(w * 1000.0); }

}  // namespace

std::string RenderedRule::asp_text() const {
  std::string head = "preference(" + name + ",(";
  for (std::size_t i = 0; i < headVars.size(); ++i) head += (i ? "," : "") + headVars[i];
  head += "))";
  std::string body;
  for (const auto& a : bodyAtoms) body += (body.empty() ? "" : ", ") + a;
  for (const auto& a : negatedAtoms) body += (body.empty() ? "" : ", ") + a;
  std::string out = head + (body.empty() ? "" : " :- " + body) + ".\n";
  for (const auto& r : auxiliaryRules) out += r + "\n";
  return out;
}

std::string rule_base_name(const FeatureKey& pattern) {
  std::string name;
  for (const auto& c : pattern) {
    std::string part = c.terminal.key;
    if (!c.terminal.value.empty()) part += "_" + c.terminal.value;
    part = sanitize(part);
    if (c.negated) part = "not_" + part;
    name += (name.empty() ? "" : "_") + part;
  }
  if (name.empty() || !std::islower(static_cast<unsigned char>(name.front()))) name = "f_" + name;
  return name;
}

RenderedRule render_feature(const Feature& f, const RenderContext& ctx, const std::string& name) {
  RenderedRule rule;
  rule.name = name;
  rule.sourceFeatureId = f.id;
  rule.pattern = f.components;
  rule.level = f.level;
  rule.strippedDepth = f.strippedDepth;

  ChainRenderer renderer{ctx};
  Scope scope;
  for (const auto& c : f.components)
    if (!c.negated) renderer.render(scope, c);
  int aux = 0;
  for (const auto& c : f.components) {
    if (!c.negated) continue;
    const std::string pred = "has_" + name + "_" + std::to_string(aux++);
    Scope inner;
    auto guard = c.guard();
    std::string args;
    if (guard) {
      // the guard entity is shared with the negated chain inside the auxiliary rule
      const bool entityGuard = c.parents.empty();
      const std::string outer = entityGuard ? renderer.membership(scope, c.membership) : renderer.render(scope, *guard);
      args = "(" + (entityGuard ? renderer.membership(inner, c.membership) : renderer.render(inner, *guard)) + ")";
      rule.negatedAtoms.push_back("not " + pred + "(" + outer + ")");
    } else {
      rule.negatedAtoms.push_back("not " + pred);
    }
    renderer.render(inner, c.positive());
    std::string body;
    for (const auto& a : inner.atoms) body += (body.empty() ? "" : ", ") + a;
    rule.auxiliaryRules.push_back(pred + args + " :- " + body + ".");
  }
  rule.bodyAtoms = scope.atoms;
  rule.headVars = scope.entityVars;

  std::string d;
  for (const auto& c : f.components) d += (d.empty() ? "" : " and ") + describe(c);
  rule.description = d;
  return rule;
}

RenderedRule render_feature(const Feature& f, const RenderContext& ctx) {
  return render_feature(f, ctx, rule_base_name(f.components));
}

KnowledgeBase render_knowledge_base(const std::vector<int>& features, const FeatureCatalog& catalog,
                                    const RenderContext& ctx) {
  KnowledgeBase kb;
  kb.context = ctx;
  std::map<std::string, int> used;
  std::set<std::string> names;
  for (int id : features) {
    const Feature& f = catalog[id];
    const std::string base = rule_base_name(f.components);
    std::string name = base;
    for (int n = used[base]; names.count(name); ++n) name = base + "_" + std::to_string(n + 1);
    used[base] += 1;
    names.insert(name);
    kb.rules.push_back(render_feature(f, ctx, name));
  }
  return kb;
}

void assign_weights(KnowledgeBase& kb, const LinearModel& model) {
  if (static_cast<std::size_t>(model.weights.size()) != kb.rules.size() || model.features.size() != kb.rules.size())
    throw Error(ErrorKind::OrderMismatch, "model has " + std::to_string(model.weights.size()) + " weights for " +
                                              std::to_string(kb.rules.size()) + " rules");
  for (std::size_t i = 0; i < kb.rules.size(); ++i) {
    if (model.features[i] != kb.rules[i].sourceFeatureId)
      throw Error(ErrorKind::OrderMismatch, "rule " + kb.rules[i].name + " does not match model column " +
                                                std::to_string(i));
    kb.rules[i].weight = model.weights[static_cast<Eigen::Index>(i)];
  }
}

ChainBag design_chains(const DesignAst& ast, const RenderContext& ctx, Diagnostics* diagnostics) {
  return discretize_terminals(enumerate_chains(ast, ctx.schema, diagnostics), ctx.boundaries, diagnostics);
}

Count count_pattern(const FeatureKey& pattern, const ChainBag& chains) {
  const VectorLookup lookup = [&](const KeyValueChain& c) {
    FrequencyVector v = FrequencyVector::zeros(1);
    if (c.grounded) {
      auto it = chains.find(c);
      if (it != chains.end()) v.pos[0] = it->second;
    } else {
      std::vector<FrequencyVector> hits;
      for (const auto& [occ, n] : chains)
        if (c.matches(occ)) hits.push_back({{n}, {0}});
      if (!hits.empty()) v = unground_merge(hits);
    }
    return v;
  };
  if (pattern.empty()) return 0;
  if (pattern.size() == 1 || pattern.front().grounded) return components_vector(pattern, lookup).pos[0];

  auto anchor = std::find_if(pattern.begin(), pattern.end(), [](const auto& c) { return !c.negated; });
  if (anchor == pattern.end()) return 0;
  const std::size_t q = anchor->parents.size();
  std::set<std::pair<std::vector<ChainSegment>, std::vector<ChainSegment>>> groundings;
  for (const auto& [occ, n] : chains)
    if (anchor->matches(occ))
      groundings.emplace(occ.membership, std::vector<ChainSegment>(occ.parents.begin(),
                                                                    occ.parents.end() - static_cast<std::ptrdiff_t>(q)));
  std::vector<FrequencyVector> parts;
  for (const auto& [membership, outer] : groundings) {
    FeatureKey instance;
    for (const auto& c : pattern) {
      KeyValueChain g;
      g.membership = membership;
      g.parents = outer;
      g.parents.insert(g.parents.end(), c.parents.begin(), c.parents.end());
      g.terminal = c.terminal;
      g.negated = c.negated;
      instance.push_back(std::move(g));
    }
    parts.push_back(components_vector(instance, lookup));
  }
  return parts.empty() ? 0 : unground_merge(parts).pos[0];
}

Count detect(const RenderedRule& rule, const DesignAst& ast, const RenderContext& ctx) {
  return count_pattern(rule.pattern, design_chains(ast, ctx));
}

std::vector<Count> detect_all(const KnowledgeBase& kb, const ChainBag& chains) {
  std::vector<Count> out;
  out.reserve(kb.rules.size());
  for (const auto& r : kb.rules) out.push_back(count_pattern(r.pattern, chains));
  return out;
}

std::vector<RankedDesign> rank_designs(const KnowledgeBase& kb, const std::vector<DesignAst>& asts, Exec exec) {
  std::vector<RankedDesign> out(asts.size());
  const auto n = static_cast<std::ptrdiff_t>(asts.size());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto counts = detect_all(kb, design_chains(asts[static_cast<std::size_t>(i)], kb.context));
    double score = 0.0;
    for (std::size_t r = 0; r < counts.size(); ++r) score += kb.rules[r].weight * counts[r];
    out[static_cast<std::size_t>(i)] = {static_cast<std::size_t>(i), score, false};
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  for (std::size_t i = 0; i + 1 < out.size(); ++i)
    if (out[i].score == out[i + 1].score) out[i].tied = out[i + 1].tied = true;
  return out;
}

double preference_margin(const KnowledgeBase& kb, const std::vector<Count>& a, const std::vector<Count>& b) {
  double m = 0.0;
  for (std::size_t r = 0; r < kb.rules.size(); ++r) m += kb.rules[r].weight * (a[r] - b[r]);
  return m;
}

nlohmann::json registry_to_json(const KeyRegistry& registry) {
  nlohmann::json homes = nlohmann::json::object();
  for (const auto& [key, hs] : registry.homes) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& h : hs) a.push_back(nlohmann::json::array({h.entityType, h.attrName}));
    homes[key] = a;
  }
  return {{"homes", homes}, {"parentTypes", registry.parentTypes}};
}

KeyRegistry registry_from_json(const nlohmann::json& j) {
  KeyRegistry r;
  for (const auto& [key, hs] : j.at("homes").items())
    for (const auto& h : hs) r.homes[key].insert({h.at(0).get<std::string>(), h.at(1).get<std::string>()});
  r.parentTypes = j.at("parentTypes").get<std::map<std::string, std::set<std::string>>>();
  return r;
}

nlohmann::json boundaries_to_json(const BoundaryMap& boundaries) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, b] : boundaries)
    out[key] = {{"cutpoints", b.cutpoints}, {"k", b.k}, {"silhouette", b.silhouette}, {"low", b.low}, {"high", b.high}};
  return out;
}

BoundaryMap boundaries_from_json(const nlohmann::json& j) {
  BoundaryMap out;
  for (const auto& [key, b] : j.items()) {
    NumericBoundarySet s;
    s.terminalKey = key;
    s.cutpoints = b.at("cutpoints").get<std::vector<double>>();
    s.k = b.at("k").get<int>();
    s.silhouette = b.at("silhouette").get<double>();
    s.low = b.at("low").get<double>();
    s.high = b.at("high").get<double>();
    out.emplace(key, std::move(s));
  }
  return out;
}

std::string emit_asp(const KnowledgeBase& kb) {
  std::string out = "% knowledge base: " + std::to_string(kb.rules.size()) + " rules\n";
  out += "% schema: " + schema_to_json(kb.context.schema).dump() + "\n";
  out += "% registry: " + registry_to_json(kb.context.registry).dump() + "\n";
  out += "% boundaries: " + boundaries_to_json(kb.context.boundaries).dump() + "\n";
  out += "% provenance: " + kb.provenance.dump() + "\n";
  for (const auto& r : kb.rules) {
    nlohmann::json feature = {{"id", r.sourceFeatureId},
                              {"level", to_string(r.level)},
                              {"strippedDepth", r.strippedDepth},
                              {"components", components_to_json(r.pattern)}};
    char weight[40];
    std::snprintf(weight, sizeof weight, "%.17g", r.weight);
    out += "\n% rule: " + r.name + "\n";
    out += "% feature: " + feature.dump() + "\n";
    out += std::string("% weight: ") + weight + "\n";
    out += "% description: " + r.description + "\n";
    out += r.asp_text();
    out += "preference_weight(" + r.name + "," + std::to_string(integer_weight(r.weight)) + ").\n";
  }
  return out;
}

KnowledgeBase parse_asp(std::string_view text) {
  KnowledgeBase kb;
  std::istringstream in{std::string(text)};
  std::string line;
  auto field = [](const std::string& l, std::string_view tag) -> std::optional<std::string> {
    if (l.rfind(tag, 0) == 0) return l.substr(tag.size());
    return std::nullopt;
  };

  struct Pending {
    std::string name;
    nlohmann::json feature;
    double weight = 0.0;
    std::string description;
    std::string clauses;
  };
  std::vector<Pending> pending;
  std::size_t expected = 0;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (auto v = field(line, "% knowledge base: ")) {
        expected = std::stoul(*v);
      } else if (auto v = field(line, "% schema: ")) {
        kb.context.schema = schema_from_json(nlohmann::json::parse(*v));
      } else if (auto v = field(line, "% registry: ")) {
        kb.context.registry = registry_from_json(nlohmann::json::parse(*v));
      } else if (auto v = field(line, "% boundaries: ")) {
        kb.context.boundaries = boundaries_from_json(nlohmann::json::parse(*v));
      } else if (auto v = field(line, "% provenance: ")) {
        kb.provenance = nlohmann::json::parse(*v);
      } else if (auto v = field(line, "% rule: ")) {
        pending.push_back({*v, {}, 0.0, {}, {}});
      } else if (line[0] == '%') {
        if (pending.empty()) continue;
        if (auto f = field(line, "% feature: "))
          pending.back().feature = nlohmann::json::parse(*f);
        else if (auto w = field(line, "% weight: "))
          pending.back().weight = std::strtod(w->c_str(), nullptr);
        else if (auto d = field(line, "% description: "))
          pending.back().description = *d;
      } else {
        if (pending.empty()) throw Error(ErrorKind::SyntaxError, "clause outside a rule block: " + line);
        pending.back().clauses += line + "\n";
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SyntaxError, std::string("knowledge base header: ") + e.what());
  }
  if (pending.size() != expected)
    throw Error(ErrorKind::SyntaxError, "expected " + std::to_string(expected) + " rules, found " +
                                            std::to_string(pending.size()));

  for (auto& p : pending) {
    Feature f;
    try {
      f.id = p.feature.at("id").get<int>();
      f.level = level_from_string(p.feature.at("level").get<std::string>());
      f.strippedDepth = p.feature.at("strippedDepth").get<int>();
      f.components = components_from_json(p.feature.at("components"));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::SyntaxError, "rule " + p.name + ": " + e.what());
    }
    RenderedRule r = render_feature(f, kb.context, p.name);
    r.weight = p.weight;
    const std::string expectedClauses =
        r.asp_text() + "preference_weight(" + r.name + "," + std::to_string(integer_weight(r.weight)) + ").\n";
    if (expectedClauses != p.clauses)
      throw Error(ErrorKind::SyntaxError, "rule " + p.name + ": clauses do not match its feature comment");
    kb.rules.push_back(std::move(r));
  }
  return kb;
}

nlohmann::json knowledge_base_to_json(const KnowledgeBase& kb) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : kb.rules)
    rules.push_back({{"name", r.name},
                     {"featureId", r.sourceFeatureId},
                     {"weight", r.weight},
                     {"integerWeight", integer_weight(r.weight)},
                     {"description", r.description},
                     {"level", to_string(r.level)},
                     {"components", components_to_json(r.pattern)},
                     {"asp", r.asp_text()}});
  return {{"rules", rules},
          {"schema", schema_to_json(kb.context.schema)},
          {"registry", registry_to_json(kb.context.registry)},
          {"boundaries", boundaries_to_json(kb.context.boundaries)},
          {"provenance", kb.provenance}};
}

}  // namespace kbsynth
