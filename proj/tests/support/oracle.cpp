// SPDX-License-Identifier: Apache-2.0

#include "oracle.hpp"

#include <algorithm>
#include <set>

namespace kbsynth::testing {

namespace {

struct Walk {
  const SchemaConfig& schema;
  const BoundaryMap& boundaries;
  std::vector<Occurrence> out;

  std::string key_of(const std::string& type, const std::string& attr) const {
    auto it = schema.keyAliases.find(type + "." + attr);
    return it == schema.keyAliases.end() ? attr : it->second;
  }

  bool parent_forming(const std::string& key) const {
    return std::count(schema.parentForming.begin(), schema.parentForming.end(), key) > 0;
  }

  std::string value_of(const std::string& key, const Value& v) const {
    auto b = boundaries.find(key);
    if (b == boundaries.end() || !v.is_numeric()) return v.text;
    return b->second.label(v.number());
  }

  // Emits the node's attribute occurrences and returns its parent-forming segments.
  std::vector<ChainSegment> node_attributes(const AstNode& node, const std::vector<ChainSegment>& m,
                                            const std::vector<ChainSegment>& p) {
    std::vector<ChainSegment> own;
    for (const auto& a : node.attributes)
      if (parent_forming(key_of(node.entityType, a.name))) own.push_back({key_of(node.entityType, a.name), a.value.text});
    std::size_t before = 0;
    for (const auto& a : node.attributes) {
      const std::string key = key_of(node.entityType, a.name);
      std::vector<ChainSegment> parents = p;
      const std::size_t take = parent_forming(key) ? before++ : own.size();
      for (std::size_t i = 0; i < take; ++i) parents.push_back(own[i]);
      out.push_back({m, parents, {key, value_of(key, a.value)}});
    }
    return own;
  }

  void children(const AstNode& node, const std::vector<ChainSegment>& m, const std::vector<ChainSegment>& p) {
    for (const auto& c : node.children) {
      out.push_back({m, p, {c.entityType, ""}});
      auto cm = m;
      bool keyed = false;
      auto k = schema.keyedBy.find(c.entityType);
      if (k != schema.keyedBy.end())
        for (const auto& a : c.attributes) keyed = keyed || key_of(c.entityType, a.name) == k->second;
      if (!keyed) cm.push_back({c.entityType, std::to_string(c.ordinal)});
      auto cp = p;
      for (auto& s : node_attributes(c, cm, p)) cp.push_back(s);
      children(c, cm, cp);
    }
  }
};

bool suffix(const std::vector<ChainSegment>& full, const std::vector<ChainSegment>& tail) {
  if (tail.size() > full.size()) return false;
  for (std::size_t i = 0; i < tail.size(); ++i)
    if (!(full[full.size() - tail.size() + i] == tail[i])) return false;
  return true;
}

int instance_count(const std::vector<KeyValueChain>& comps, const std::vector<Occurrence>& occ) {
  std::vector<int> counts;
  for (const auto& c : comps) {
    KeyValueChain pos = c;
    pos.negated = false;
    int n = oracle_chain_count(pos, occ);
    if (c.negated) {
      auto g = oracle_guard(pos);
      n = n == 0 ? (g ? oracle_chain_count(*g, occ) : 1) : 0;
    }
    counts.push_back(n);
  }
  if (counts.size() == 1) return counts[0];
  if (std::any_of(counts.begin(), counts.end(), [](int n) { return n == 0; })) return 0;
  return *std::max_element(counts.begin(), counts.end());
}

using Grounding = std::pair<std::vector<ChainSegment>, std::vector<ChainSegment>>;

std::set<Grounding> groundings(const std::vector<KeyValueChain>& comps, const std::vector<Occurrence>& occ) {
  const KeyValueChain* anchor = nullptr;
  for (const auto& c : comps)
    if (!c.negated) {
      anchor = &c;
      break;
    }
  std::set<Grounding> out;
  if (!anchor) return out;
  for (const auto& o : occ)
    if (o.terminal == anchor->terminal && suffix(o.parents, anchor->parents))
      out.emplace(o.membership, std::vector<ChainSegment>(o.parents.begin(), o.parents.end() - static_cast<std::ptrdiff_t>(anchor->parents.size())));
  return out;
}

std::vector<KeyValueChain> instantiate(const std::vector<KeyValueChain>& comps, const Grounding& g) {
  std::vector<KeyValueChain> inst;
  for (const auto& c : comps) {
    KeyValueChain k;
    k.membership = g.first;
    k.parents = g.second;
    k.parents.insert(k.parents.end(), c.parents.begin(), c.parents.end());
    k.terminal = c.terminal;
    k.negated = c.negated;
    inst.push_back(k);
  }
  return inst;
}

}  // namespace

std::vector<Occurrence> oracle_occurrences(const DesignAst& ast, const SchemaConfig& schema,
                                           const BoundaryMap& boundaries) {
  Walk w{schema, boundaries, {}};
  auto own = w.node_attributes(ast.root, {}, {});
  w.children(ast.root, {}, own);
  return w.out;
}

int oracle_chain_count(const KeyValueChain& chain, const std::vector<Occurrence>& occ) {
  int n = 0;
  for (const auto& o : occ) {
    if (!(o.terminal == chain.terminal)) continue;
    if (chain.grounded ? (o.membership == chain.membership && o.parents == chain.parents)
                       : suffix(o.parents, chain.parents))
      ++n;
  }
  return n;
}

std::optional<KeyValueChain> oracle_guard(const KeyValueChain& chain) {
  KeyValueChain g;
  g.grounded = chain.grounded;
  if (!chain.parents.empty()) {
    g.membership = chain.membership;
    g.parents.assign(chain.parents.begin(), chain.parents.end() - 1);
    g.terminal = chain.parents.back();
    return g;
  }
  if (chain.grounded && !chain.membership.empty()) {
    g.membership.assign(chain.membership.begin(), chain.membership.end() - 1);
    g.terminal = {chain.membership.back().key, ""};
    return g;
  }
  return std::nullopt;
}

int oracle_feature_count(const std::vector<KeyValueChain>& comps, const std::vector<Occurrence>& occ) {
  if (comps.size() == 1 || comps.front().grounded) return instance_count(comps, occ);
  int total = 0;
  for (const auto& g : groundings(comps, occ)) total += instance_count(instantiate(comps, g), occ);
  return total;
}

bool oracle_negation_valid(const std::vector<KeyValueChain>& comps, const std::vector<Occurrence>& occ) {
  auto check = [&](const std::vector<KeyValueChain>& inst) {
    if (instance_count(inst, occ) == 0) return true;
    for (const auto& c : inst) {
      if (!c.negated) continue;
      KeyValueChain pos = c;
      pos.negated = false;
      if (oracle_chain_count(pos, occ) != 0) return false;
      auto g = oracle_guard(pos);
      if (g && oracle_chain_count(*g, occ) == 0) return false;
    }
    return true;
  };
  if (comps.size() == 1 || comps.front().grounded) return check(comps);
  for (const auto& g : groundings(comps, occ))
    if (!check(instantiate(comps, g))) return false;
  return true;
}

}  // namespace kbsynth::testing
