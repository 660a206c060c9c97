// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kbsynth/error.hpp"
#include "kbsynth/facts.hpp"
#include "kbsynth/schema.hpp"

namespace kbsynth {

struct ChainSegment {
  std::string key;
  std::string value;  // empty for an entity-existence terminal

  auto operator<=>(const ChainSegment&) const = default;
  bool operator==(const ChainSegment&) const = default;
};

/// A feature atom: membership (entityType.ordinal) + parent segments + terminal.
///
/// Grounded chains match occurrences with exactly this membership and parent
/// list. Un-grounded chains carry no membership and match any occurrence whose
/// parent list ends with `parents`.
struct KeyValueChain {
  std::vector<ChainSegment> membership;
  std::vector<ChainSegment> parents;
  ChainSegment terminal;
  bool negated = false;
  bool grounded = true;

  /// Dot-joined form, e.g. view.0.mark.0.mark_type.point.channel.size.
  /// Grounded root-level chains are prefixed with "root" to stay distinct from
  /// their un-grounded counterparts; negated chains with "!".
  std::string canonical() const;
  std::size_t length() const { return membership.size() + parents.size() + 1; }

  /// Membership removed and the outermost `depth` parent segments dropped.
  KeyValueChain ungrounded(std::size_t depth) const;
  /// Same chain with negation cleared.
  KeyValueChain positive() const;
  /// The parent-information chain a negation is conditioned on; nullopt means
  /// "the design itself".
  std::optional<KeyValueChain> guard() const;
  /// Whether a raw occurrence chain (grounded, non-negated) satisfies this pattern.
  bool matches(const KeyValueChain& occurrence) const;

  auto operator<=>(const KeyValueChain&) const = default;
  bool operator==(const KeyValueChain&) const = default;
};

/// Multiset of chains found in one design.
using ChainBag = std::map<KeyValueChain, std::int32_t>;

/// Where a chain key lives in the fact representation.
struct KeyHome {
  std::string entityType;
  std::string attrName;  // empty for entity-existence keys

  auto operator<=>(const KeyHome&) const = default;
  bool operator==(const KeyHome&) const = default;
};

/// key -> homes observed during enumeration, plus the parent type seen for each entity type.
struct KeyRegistry {
  std::map<std::string, std::set<KeyHome>> homes;
  std::map<std::string, std::set<std::string>> parentTypes;

  void merge(const KeyRegistry& other);
};

/// One chain per (node, attribute occurrence) plus one per entity.
ChainBag enumerate_chains(const DesignAst& ast, const SchemaConfig& schema,
                          Diagnostics* diagnostics = nullptr, KeyRegistry* registry = nullptr);

struct NumericBoundarySet {
  std::string terminalKey;
  std::vector<double> cutpoints;  // strictly ascending
  int k = 0;
  double silhouette = 0.0;
  double low = 0.0;   // observed range
  double high = 0.0;

  /// Half-open buckets: bucket i holds values in [cut[i-1], cut[i]).
  std::size_t bucket(double value) const;
  /// `upper_<c>` for values below cutpoint c, `from_<c>` for the last bucket.
  std::string label(double value) const;
};

/// 1-D k-means with k-means++ seeding, 100 Lloyd iterations and seeded restarts.
struct KMeans1D {
  std::vector<double> centroids;       // ascending
  std::vector<int> assignment;         // per input value
  double sse = 0.0;
};

KMeans1D kmeans_1d(const std::vector<double>& values, int k, std::uint64_t seed);

/// Silhouette score with 1-D Euclidean distance; singleton clusters score 0.
double silhouette_1d(const std::vector<double>& values, const std::vector<int>& assignment, int k);

/// Picks k in [2,10] by silhouette and snaps cutpoints to round values that
/// keep every point's cluster. nullopt when fewer than two distinct values.
std::optional<NumericBoundarySet> fit_numeric_boundaries(const std::vector<double>& values,
                                                         std::uint64_t seed);

/// Roundest value in (low, high] near `mid`; used to make cutpoints readable.
double friendly_cutpoint(double low, double high);

using BoundaryMap = std::map<std::string, NumericBoundarySet>;

/// Numeric terminal values per key across all designs; keys with any symbolic
/// value are dropped unless the schema lists them as numeric.
std::map<std::string, std::vector<double>> collect_numeric_terminals(const std::vector<ChainBag>& bags,
                                                                     const SchemaConfig& schema);

BoundaryMap fit_all_boundaries(const std::vector<ChainBag>& bags, const SchemaConfig& schema,
                               std::uint64_t seed);

ChainBag discretize_terminals(const ChainBag& chains, const BoundaryMap& boundaries,
                              Diagnostics* diagnostics = nullptr);

}  // namespace kbsynth
