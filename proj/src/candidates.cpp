// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/candidates.hpp"

#include <algorithm>

#include "kbsynth/error.hpp"

namespace kbsynth {

namespace {

bool is_prefix(const std::vector<ChainSegment>& prefix, const std::vector<ChainSegment>& full) {
  return prefix.size() <= full.size() && std::equal(prefix.begin(), prefix.end(), full.begin());
}

// Shared parent-prefix length when the components can be un-grounded together.
std::optional<std::size_t> ungroundable_prefix(const FeatureKey& comps) {
  const auto& first = comps.front();
  if (!first.grounded) return std::nullopt;
  bool samePrefix = true;
  bool sameParents = true;
  for (const auto& c : comps) {
    if (c.membership != first.membership || c.parents.size() != first.parents.size()) return std::nullopt;
    if (c.parents != first.parents) sameParents = false;
    if (!first.parents.empty() &&
        !std::equal(c.parents.begin(), c.parents.end() - 1, first.parents.begin()))
      samePrefix = false;
  }
  if (sameParents) return first.parents.size();
  if (samePrefix) return first.parents.size() - 1;
  return std::nullopt;
}

struct UngroundedGroup {
  std::set<int> sources;
  int minDepth = 0;
};

}  // namespace

std::string to_string(GroundingLevel level) {
  switch (level) {
    case GroundingLevel::Grounded: return "grounded";
    case GroundingLevel::MembershipStripped: return "membership_stripped";
    case GroundingLevel::ParentStripped: return "parent_stripped";
  }
  return "unknown";
}

bool Feature::has_negation() const {
  return std::any_of(components.begin(), components.end(), [](const auto& c) { return c.negated; });
}

std::string Feature::canonical() const {
  std::string out;
  for (const auto& c : components) {
    if (!out.empty()) out += " + ";
    out += c.canonical();
  }
  return out;
}

nlohmann::json chain_to_json(const KeyValueChain& chain) {
  auto segs = [](const std::vector<ChainSegment>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : v) a.push_back(nlohmann::json::array({s.key, s.value}));
    return a;
  };
  return {{"membership", segs(chain.membership)},
          {"parents", segs(chain.parents)},
          {"terminal", nlohmann::json::array({chain.terminal.key, chain.terminal.value})},
          {"negated", chain.negated},
          {"grounded", chain.grounded}};
}

KeyValueChain chain_from_json(const nlohmann::json& j) {
  auto segs = [](const nlohmann::json& a) {
    std::vector<ChainSegment> v;
    for (const auto& s : a) v.push_back({s.at(0).get<std::string>(), s.at(1).get<std::string>()});
    return v;
  };
  KeyValueChain c;
  try {
    c.membership = segs(j.at("membership"));
    c.parents = segs(j.at("parents"));
    c.terminal = {j.at("terminal").at(0).get<std::string>(), j.at("terminal").at(1).get<std::string>()};
    c.negated = j.value("negated", false);
    c.grounded = j.value("grounded", true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed chain: ") + e.what());
  }
  if (!c.grounded && !c.membership.empty())
    throw Error(ErrorKind::ConfigError, "un-grounded chain cannot carry membership");
  return c;
}

nlohmann::json components_to_json(const FeatureKey& components) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : components) a.push_back(chain_to_json(c));
  return a;
}

FeatureKey components_from_json(const nlohmann::json& j) {
  FeatureKey key;
  for (const auto& c : j) key.push_back(chain_from_json(c));
  std::sort(key.begin(), key.end());
  if (key.empty()) throw Error(ErrorKind::ConfigError, "feature without components");
  return key;
}

int FeatureCatalog::insert(Feature feature) {
  auto it = byKey_.find(feature.components);
  if (it != byKey_.end()) {
    auto& existing = features_[static_cast<std::size_t>(it->second)];
    existing.parentsOf.insert(feature.parentsOf.begin(), feature.parentsOf.end());
    existing.dependsOn.insert(feature.dependsOn.begin(), feature.dependsOn.end());
    return it->second;
  }
  if (limit_ > 0 && features_.size() >= limit_)
    throw Error(ErrorKind::CatalogOverflow,
                "catalog exceeds " + std::to_string(limit_) + " features; lower maxArity or raise the cap");
  feature.id = static_cast<int>(features_.size());
  byKey_.emplace(feature.components, feature.id);
  features_.push_back(std::move(feature));
  return features_.back().id;
}

std::optional<int> FeatureCatalog::find(const FeatureKey& key) const {
  auto it = byKey_.find(key);
  if (it == byKey_.end()) return std::nullopt;
  return it->second;
}

ExtractedCorpus extract_chains(const Corpus& corpus, const SchemaConfig& schema, std::uint64_t seed,
                               Exec exec) {
  const auto designs = static_cast<std::ptrdiff_t>(corpus.size() * 2);
  std::vector<ChainBag> raw(static_cast<std::size_t>(designs));
  std::vector<Diagnostics> diags(raw.size());
  std::vector<KeyRegistry> regs(raw.size());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (std::ptrdiff_t d = 0; d < designs; ++d) {
    auto i = static_cast<std::size_t>(d);
    raw[i] = enumerate_chains(corpus.design(i), schema, &diags[i], &regs[i]);
  }

  ExtractedCorpus out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.registry.merge(regs[i]);
    for (auto& w : diags[i].warnings) out.diagnostics.warn("design " + std::to_string(i) + ": " + w);
  }
  out.boundaries = fit_all_boundaries(raw, schema, seed);
  out.bags.reserve(raw.size());
  for (const auto& bag : raw) out.bags.push_back(discretize_terminals(bag, out.boundaries, &out.diagnostics));
  return out;
}

bool chains_combinable(const KeyValueChain& a, const KeyValueChain& b, const SchemaConfig& schema) {
  if (!a.grounded || !b.grounded) return false;
  if (a.positive() == b.positive()) return false;
  if (a.membership == b.membership && a.parents == b.parents) return true;
  for (const auto& rule : schema.scoping) {
    if (rule.kind == ScopingRule::Kind::Sibling) {
      if (a.membership == b.membership && a.parents.size() == b.parents.size() && !a.parents.empty() &&
          std::equal(a.parents.begin(), a.parents.end() - 1, b.parents.begin()) &&
          a.parents.back().key == rule.key && b.parents.back().key == rule.key)
        return true;
    } else {
      auto cross = [&](const KeyValueChain& hi, const KeyValueChain& lo) {
        return hi.terminal.key == rule.key && (rule.lower == "*" || lo.terminal.key == rule.lower) &&
               is_prefix(hi.membership, lo.membership) && is_prefix(hi.parents, lo.parents);
      };
      if (cross(a, b) || cross(b, a)) return true;
    }
  }
  return false;
}

bool combinable(const Feature& a, const Feature& b, const SchemaConfig& schema) {
  for (const auto& x : a.components)
    for (const auto& y : b.components)
      if (!chains_combinable(x, y, schema)) return false;
  return true;
}

FrequencyVector components_vector(const FeatureKey& components, const VectorLookup& lookup) {
  std::vector<FrequencyVector> vs;
  vs.reserve(components.size());
  for (const auto& c : components) {
    FrequencyVector v = lookup(c.positive());
    if (c.negated) {
      auto g = c.guard();
      v = negate_vector(v, g ? std::optional<FrequencyVector>(lookup(*g)) : std::nullopt);
    }
    vs.push_back(std::move(v));
  }
  if (vs.size() == 1) return vs.front();
  return combine_vectors(vs);
}

FeatureCatalog build_catalog(const ExtractedCorpus& extracted, const SchemaConfig& schema,
                             const CatalogOptions& options) {
  if (options.maxArity < 1) throw Error(ErrorKind::ConfigError, "maxArity must be at least 1");
  const std::size_t P = extracted.pairs();
  FeatureCatalog catalog;
  catalog.set_pairs(P);
  catalog.set_limit(options.maxFeatures);

  // Grounded unary chains.
  std::map<KeyValueChain, FrequencyVector> grounded;
  for (std::size_t d = 0; d < extracted.bags.size(); ++d) {
    for (const auto& [chain, count] : extracted.bags[d]) {
      auto [it, fresh] = grounded.try_emplace(chain);
      if (fresh) it->second = FrequencyVector::zeros(P);
      (d % 2 == 0 ? it->second.pos : it->second.neg)[d / 2] = count;
    }
  }
  std::map<KeyValueChain, int> unaryId;
  std::map<std::vector<ChainSegment>, std::vector<int>> buckets;
  for (const auto& [chain, vec] : grounded) {
    Feature f;
    f.components = {chain};
    f.vector = vec;
    int id = catalog.insert(std::move(f));
    unaryId[chain] = id;
    buckets[chain.membership].push_back(id);
  }

  // Un-grounded unary chains: membership stripped, then parents outermost-first.
  std::map<KeyValueChain, std::vector<const KeyValueChain*>> sourcesOf;
  std::map<KeyValueChain, int> minDepth;
  for (const auto& [chain, vec] : grounded) {
    for (std::size_t d = 0; d <= chain.parents.size(); ++d) {
      auto u = chain.ungrounded(d);
      sourcesOf[u].push_back(&chain);
      auto [it, fresh] = minDepth.try_emplace(u, static_cast<int>(d));
      if (!fresh) it->second = std::min(it->second, static_cast<int>(d));
    }
  }
  std::map<KeyValueChain, FrequencyVector> ungrounded;
  std::map<KeyValueChain, int> ungroundedId;
  for (const auto& [u, sources] : sourcesOf) {
    std::vector<FrequencyVector> vs;
    Feature f;
    for (const auto* s : sources) {
      vs.push_back(grounded.at(*s));
      f.parentsOf.insert(unaryId.at(*s));
    }
    f.components = {u};
    f.vector = unground_merge(vs);
    int depth = minDepth.at(u);
    f.level = depth == 0 ? GroundingLevel::MembershipStripped : GroundingLevel::ParentStripped;
    f.strippedDepth = depth;
    ungrounded[u] = f.vector;
    ungroundedId[u] = catalog.insert(std::move(f));
  }

  const VectorLookup lookup = [&](const KeyValueChain& c) {
    const auto& table = c.grounded ? grounded : ungrounded;
    auto it = table.find(c);
    return it != table.end() ? it->second : FrequencyVector::zeros(P);
  };

  // Grounded combinations, grown one unary component at a time.
  struct Combo {
    std::vector<int> ids;
    FrequencyVector vec;
  };
  std::vector<Combo> level;
  for (const auto& [chain, id] : unaryId) level.push_back({{id}, grounded.at(chain)});
  std::vector<int> positiveCombos;

  const bool crossRules = std::any_of(schema.scoping.begin(), schema.scoping.end(), [](const auto& r) {
    return r.kind == ScopingRule::Kind::CrossLevel;
  });

  for (int arity = 2; arity <= options.maxArity; ++arity) {
    std::vector<std::vector<Combo>> grown(level.size());
    const auto n = static_cast<std::ptrdiff_t>(level.size());
#pragma omp parallel for schedule(dynamic) if (options.exec == Exec::Parallel)
    for (std::ptrdiff_t li = 0; li < n; ++li) {
      const Combo& base = level[static_cast<std::size_t>(li)];
      std::set<int> candidates;
      for (int id : base.ids) {
        const auto& chain = catalog[id].components.front();
        const auto& bucket = buckets.at(chain.membership);
        candidates.insert(bucket.begin(), bucket.end());
        if (!crossRules) continue;
        for (auto it = buckets.lower_bound(chain.membership);
             it != buckets.end() && is_prefix(chain.membership, it->first); ++it)
          candidates.insert(it->second.begin(), it->second.end());
        for (std::size_t l = 0; l <= chain.membership.size(); ++l) {
          std::vector<ChainSegment> prefix(chain.membership.begin(),
                                           chain.membership.begin() + static_cast<std::ptrdiff_t>(l));
          auto it = buckets.find(prefix);
          if (it != buckets.end()) candidates.insert(it->second.begin(), it->second.end());
        }
      }
      const int last = base.ids.back();
      for (auto it = candidates.upper_bound(last); it != candidates.end(); ++it) {
        const auto& cand = catalog[*it].components.front();
        bool ok = std::all_of(base.ids.begin(), base.ids.end(), [&](int id) {
          return chains_combinable(catalog[id].components.front(), cand, schema);
        });
        if (!ok) continue;
        const FrequencyVector pair[] = {base.vec, catalog[*it].vector};
        auto vec = combine_vectors(pair);
        if (vec.is_zero()) continue;
        auto ids = base.ids;
        ids.push_back(*it);
        grown[static_cast<std::size_t>(li)].push_back({std::move(ids), std::move(vec)});
      }
    }
    level.clear();
    for (auto& g : grown)
      for (auto& c : g) {
        Feature f;
        for (int id : c.ids) {
          f.components.push_back(catalog[id].components.front());
          f.parentsOf.insert(id);
          f.dependsOn.insert(id);
        }
        f.vector = c.vec;
        positiveCombos.push_back(catalog.insert(std::move(f)));
        level.push_back(std::move(c));
      }
  }

  // One-component negations of every combination.
  for (int comboId : positiveCombos) {
    const Feature base = catalog[comboId];
    for (std::size_t i = 0; i < base.components.size(); ++i) {
      Feature f;
      f.components = base.components;
      f.components[i].negated = true;
      f.vector = components_vector(f.components, lookup);
      if (f.vector.is_zero()) continue;
      f.parentsOf = base.parentsOf;
      for (std::size_t j = 0; j < base.components.size(); ++j)
        if (j != i) f.dependsOn.insert(unaryId.at(base.components[j]));
      catalog.insert(std::move(f));
    }
  }

  // Un-grounded combinations: strip membership, then the shared parent prefix.
  std::map<FeatureKey, UngroundedGroup> groups;
  const std::size_t groundedCount = catalog.size();
  for (std::size_t id = 0; id < groundedCount; ++id) {
    const Feature& f = catalog[static_cast<int>(id)];
    if (f.is_unary() || !f.is_grounded()) continue;
    auto prefix = ungroundable_prefix(f.components);
    if (!prefix) continue;
    for (std::size_t d = 0; d <= *prefix; ++d) {
      FeatureKey key;
      for (const auto& c : f.components) key.push_back(c.ungrounded(d));
      std::sort(key.begin(), key.end());
      auto [it, fresh] = groups.try_emplace(key);
      if (fresh) it->second.minDepth = static_cast<int>(d);
      it->second.minDepth = std::min(it->second.minDepth, static_cast<int>(d));
      it->second.sources.insert(static_cast<int>(id));
    }
  }

  std::vector<const FeatureKey*> keys;
  for (const auto& [key, group] : groups) keys.push_back(&key);
  std::vector<FrequencyVector> merged(keys.size());
  const auto nk = static_cast<std::ptrdiff_t>(keys.size());
#pragma omp parallel for schedule(dynamic) if (options.exec == Exec::Parallel)
  for (std::ptrdiff_t k = 0; k < nk; ++k) {
    const FeatureKey& key = *keys[static_cast<std::size_t>(k)];
    auto anchor = std::find_if(key.begin(), key.end(), [](const auto& c) { return !c.negated; });
    const std::size_t q = anchor->parents.size();
    // Every grounding (membership, outer parents) at which the anchor occurs.
    std::set<std::pair<std::vector<ChainSegment>, std::vector<ChainSegment>>> groundings;
    for (const auto* g : sourcesOf.at(anchor->positive()))
      groundings.emplace(g->membership,
                         std::vector<ChainSegment>(g->parents.begin(), g->parents.end() - static_cast<std::ptrdiff_t>(q)));
    std::vector<FrequencyVector> parts;
    for (const auto& [membership, outer] : groundings) {
      FeatureKey instance;
      for (const auto& c : key) {
        KeyValueChain gc;
        gc.membership = membership;
        gc.parents = outer;
        gc.parents.insert(gc.parents.end(), c.parents.begin(), c.parents.end());
        gc.terminal = c.terminal;
        gc.negated = c.negated;
        instance.push_back(std::move(gc));
      }
      parts.push_back(components_vector(instance, lookup));
    }
    merged[static_cast<std::size_t>(k)] = unground_merge(parts);
  }

  std::size_t k = 0;
  for (const auto& [key, group] : groups) {
    auto& vec = merged[k++];
    if (vec.is_zero()) continue;
    Feature f;
    f.components = key;
    f.vector = std::move(vec);
    f.level = group.minDepth == 0 ? GroundingLevel::MembershipStripped : GroundingLevel::ParentStripped;
    f.strippedDepth = group.minDepth;
    f.parentsOf = group.sources;
    for (const auto& c : key) {
      if (c.negated) continue;
      auto it = ungroundedId.find(c);
      if (it != ungroundedId.end()) f.dependsOn.insert(it->second);
    }
    catalog.insert(std::move(f));
  }
  return catalog;
}

nlohmann::json catalog_to_json(const FeatureCatalog& catalog, bool withVectors) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : catalog.features()) {
    nlohmann::json j = {{"id", f.id},
                        {"key", f.canonical()},
                        {"components", components_to_json(f.components)},
                        {"level", to_string(f.level)},
                        {"strippedDepth", f.strippedDepth},
                        {"parentsOf", f.parentsOf}};
    if (withVectors) j["vector"] = {{"pos", f.vector.pos}, {"neg", f.vector.neg}};
    features.push_back(std::move(j));
  }
  return {{"pairs", catalog.pairs()}, {"size", catalog.size()}, {"features", std::move(features)}};
}

}  // namespace kbsynth
