// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "kbsynth/candidates.hpp"
#include "oracle.hpp"
#include "synthetic.hpp"

using namespace kbsynth;
using namespace kbsynth::testing;

namespace {

Corpus two_pairs() {
  return parse_corpus_jsonl(
      R"({"positive":"entity(view,root,v).\nentity(mark,v,m).\nattribute((mark,type),m,bar).\nentity(encoding,m,e).\nattribute((encoding,channel),e,x).\nattribute((encoding,field),e,a).\n","negative":"entity(view,root,v).\nentity(mark,v,m).\nattribute((mark,type),m,point).\nentity(encoding,m,e).\nattribute((encoding,channel),e,x).\nattribute((encoding,field),e,a).\n"}
{"positive":"entity(view,root,v).\nentity(mark,v,m).\nattribute((mark,type),m,bar).\nentity(encoding,m,e).\nattribute((encoding,channel),e,y).\nattribute((encoding,field),e,b).\n","negative":"entity(view,root,v).\nentity(mark,v,m).\nattribute((mark,type),m,bar).\nentity(encoding,m,e).\nattribute((encoding,channel),e,x).\nattribute((encoding,field),e,b).\n"}
)");
}

const Feature* by_key(const FeatureCatalog& cat, const std::string& key) {
  for (const auto& f : cat.features())
    if (f.canonical() == key) return &f;
  return nullptr;
}

}  // namespace

TEST_CASE("unary vectors and un-grounded variants") {
  auto schema = test_schema();
  auto ex = extract_chains(two_pairs(), schema, 0);
  auto cat = build_catalog(ex, schema, {2, 100000, Exec::Serial});
  CHECK(cat.pairs() == 2);

  auto* bar = by_key(cat, "view.0.mark.0.mark_type.bar");
  REQUIRE(bar);
  CHECK(bar->vector.pos == std::vector<Count>{1, 1});
  CHECK(bar->vector.neg == std::vector<Count>{0, 1});
  CHECK(bar->level == GroundingLevel::Grounded);

  auto* fieldA = by_key(cat, "field.a");
  REQUIRE(fieldA);
  CHECK(fieldA->level == GroundingLevel::ParentStripped);
  CHECK(fieldA->vector.pos == std::vector<Count>{1, 0});
  CHECK(fieldA->vector.neg == std::vector<Count>{1, 0});

  auto* xa = by_key(cat, "channel.x.field.a");
  REQUIRE(xa);
  CHECK(xa->strippedDepth == 1);
}

TEST_CASE("combinations, negations and pruning") {
  auto schema = test_schema();
  auto ex = extract_chains(two_pairs(), schema, 0);
  auto cat = build_catalog(ex, schema, {2, 100000, Exec::Serial});

  for (const auto& f : cat.features()) {
    CHECK_FALSE(f.vector.is_zero());
    int negs = 0;
    for (const auto& c : f.components) negs += c.negated;
    CHECK(negs <= 1);
    if (f.is_unary()) CHECK(negs == 0);
    CHECK(static_cast<int>(f.components.size()) <= 2);
    CHECK(cat.find(f.components) == f.id);
  }

  // bar together with x/a only in pair 0's positive design
  auto* combo = by_key(cat, "view.0.mark.0.mark_type.bar + view.0.mark.0.mark_type.bar.channel.x.field.a");
  REQUIRE(combo);
  CHECK(combo->vector.pos == std::vector<Count>{1, 0});
  CHECK(combo->vector.neg == std::vector<Count>{0, 0});
  CHECK(combo->dependsOn.size() == 2);
}

TEST_CASE("insert merges provenance on duplicates") {
  FeatureCatalog cat;
  Feature f;
  f.components.push_back({});
  f.components[0].terminal = {"view", ""};
  f.parentsOf = {1};
  CHECK(cat.insert(f) == 0);
  f.parentsOf = {2};
  CHECK(cat.insert(f) == 0);
  CHECK(cat.size() == 1);
  CHECK(cat[0].parentsOf == std::set<int>{1, 2});
}

TEST_CASE("serial and parallel catalogs are identical") {
  std::mt19937_64 rng(5);
  RandomCorpusOptions o;
  o.pairs = 15;
  o.maxMarks = 2;
  auto corpus = random_corpus(rng, o);
  auto schema = test_schema();
  auto a = build_catalog(extract_chains(corpus, schema, 1, Exec::Serial), schema, {3, 1000000, Exec::Serial});
  auto b = build_catalog(extract_chains(corpus, schema, 1, Exec::Parallel), schema, {3, 1000000, Exec::Parallel});
  CHECK(catalog_to_json(a, true) == catalog_to_json(b, true));
}

TEST_CASE("every catalog vector agrees with the reference walker") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    RandomCorpusOptions o;
    o.pairs = 6;
    auto corpus = random_corpus(rng, o);
    auto schema = test_schema();
    auto ex = extract_chains(corpus, schema, seed, Exec::Serial);
    auto cat = build_catalog(ex, schema, {3, 1000000, Exec::Serial});
    std::vector<std::vector<Occurrence>> occ;
    for (const auto& p : corpus.pairs) {
      occ.push_back(oracle_occurrences(p.positive, schema, ex.boundaries));
      occ.push_back(oracle_occurrences(p.negative, schema, ex.boundaries));
    }
    for (const auto& f : cat.features())
      for (std::size_t d = 0; d < occ.size(); ++d) {
        const int want = oracle_feature_count(f.components, occ[d]);
        if (f.vector.at_design(d) != want) {
          FAIL_CHECK(f.canonical() << " design " << d << ": " << f.vector.at_design(d) << " vs " << want);
          break;
        }
      }
  }
}

TEST_CASE("feature limit is enforced") {
  std::mt19937_64 rng(3);
  auto corpus = random_corpus(rng, {});
  auto schema = test_schema();
  auto ex = extract_chains(corpus, schema, 0);
  CHECK_THROWS_AS(build_catalog(ex, schema, {3, 5, Exec::Serial}), Error);
}

TEST_CASE("catalog JSON carries keys, components and levels") {
  auto schema = test_schema();
  auto cat = build_catalog(extract_chains(two_pairs(), schema, 0), schema, {1, 1000, Exec::Serial});
  auto j = catalog_to_json(cat, false);
  REQUIRE(j.is_object());
  REQUIRE(j.contains("features"));
  CHECK(j["features"].size() == cat.size());
  auto c0 = components_from_json(j["features"][0]["components"]);
  CHECK(c0 == cat[0].components);
}
