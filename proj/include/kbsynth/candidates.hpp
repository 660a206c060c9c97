// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbsynth/chains.hpp"
#include "kbsynth/facts.hpp"
#include "kbsynth/parallel.hpp"
#include "kbsynth/schema.hpp"
#include "kbsynth/vectors.hpp"

namespace kbsynth {

enum class GroundingLevel { Grounded, MembershipStripped, ParentStripped };

std::string to_string(GroundingLevel level);

/// Components are kept sorted; at most one is negated.
using FeatureKey = std::vector<KeyValueChain>;

struct Feature {
  int id = -1;
  FeatureKey components;
  GroundingLevel level = GroundingLevel::Grounded;
  int strippedDepth = 0;  // parent segments removed, for ParentStripped
  FrequencyVector vector;
  /// Unary components of a combination, or grounded sources of an un-grounding.
  std::set<int> parentsOf;
  /// Unary features (one per positive component) that must rank before this one.
  std::set<int> dependsOn;

  bool is_unary() const { return components.size() == 1; }
  bool is_grounded() const { return components.front().grounded; }
  bool has_negation() const;
  /// Components joined by " + ".
  std::string canonical() const;
};

nlohmann::json chain_to_json(const KeyValueChain& chain);
KeyValueChain chain_from_json(const nlohmann::json& j);
nlohmann::json components_to_json(const FeatureKey& components);
FeatureKey components_from_json(const nlohmann::json& j);

class FeatureCatalog {
 public:
  /// Insert-if-absent. On a duplicate key the provenance sets are merged and
  /// the existing id is returned.
  int insert(Feature feature);
  std::optional<int> find(const FeatureKey& key) const;

  const Feature& operator[](int id) const { return features_[static_cast<std::size_t>(id)]; }
  Feature& at(int id) { return features_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return features_.size(); }
  std::size_t pairs() const { return pairs_; }
  const std::vector<Feature>& features() const { return features_; }

  void set_pairs(std::size_t p) { pairs_ = p; }
  void set_limit(std::size_t limit) { limit_ = limit; }

 private:
  std::vector<Feature> features_;
  std::map<FeatureKey, int> byKey_;
  std::size_t pairs_ = 0;
  std::size_t limit_ = 0;
};

/// Chain-level view of a corpus after enumeration and numeric bucketing.
struct ExtractedCorpus {
  std::vector<ChainBag> bags;  // per design: 2i positive, 2i+1 negative
  BoundaryMap boundaries;
  KeyRegistry registry;
  Diagnostics diagnostics;

  std::size_t pairs() const { return bags.size() / 2; }
};

ExtractedCorpus extract_chains(const Corpus& corpus, const SchemaConfig& schema, std::uint64_t seed,
                               Exec exec = Exec::Parallel);

bool chains_combinable(const KeyValueChain& a, const KeyValueChain& b, const SchemaConfig& schema);

/// Grounded features whose every component pair is combinable.
bool combinable(const Feature& a, const Feature& b, const SchemaConfig& schema);

/// Per-chain vector lookup; unknown chains count zero everywhere.
using VectorLookup = std::function<FrequencyVector(const KeyValueChain&)>;

/// Vector of a component list under combination and negation rules.
FrequencyVector components_vector(const FeatureKey& components, const VectorLookup& lookup);

struct CatalogOptions {
  int maxArity = 3;
  std::size_t maxFeatures = 2'000'000;
  Exec exec = Exec::Parallel;
};

/// Unary chains, eligible combinations with one-component negations, and
/// un-grounded variants; all-zero vectors are pruned.
FeatureCatalog build_catalog(const ExtractedCorpus& extracted, const SchemaConfig& schema,
                             const CatalogOptions& options);

/// JSON dump: canonical keys, components, grounding level, optional vectors.
nlohmann::json catalog_to_json(const FeatureCatalog& catalog, bool withVectors);

}  // namespace kbsynth
