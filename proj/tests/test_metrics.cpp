// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "kbsynth/boosting.hpp"
#include "kbsynth/metrics.hpp"
#include "kbsynth/topics.hpp"
#include "synthetic.hpp"

using namespace kbsynth;
using namespace kbsynth::testing;

namespace {

KeyValueChain chain(std::vector<ChainSegment> m, std::vector<ChainSegment> p, ChainSegment t) {
  KeyValueChain c;
  c.membership = std::move(m);
  c.parents = std::move(p);
  c.terminal = std::move(t);
  return c;
}

FeatureCatalog small_catalog(std::uint64_t seed = 2, std::size_t pairs = 10) {
  std::mt19937_64 rng(seed);
  RandomCorpusOptions o;
  o.pairs = pairs;
  auto schema = test_schema();
  return build_catalog(extract_chains(random_corpus(rng, o), schema, seed, Exec::Serial), schema,
                       {2, 1000000, Exec::Serial});
}

}  // namespace

TEST_CASE("relevance is the shared path over the longest path") {
  Feature f;
  f.components = {chain({{"view", "0"}, {"mark", "0"}}, {{"channel", "x"}}, {"field", "a"}),
                  chain({{"view", "0"}, {"mark", "0"}}, {}, {"mark_type", "bar"})};
  // paths: [view.0, mark.0, channel.x] and [view.0, mark.0]
  CHECK(score_relevance(f) == doctest::Approx(2.0 / 3.0));
  CHECK(score_specificity(f) == 4 + 3);

  f.components[1] = chain({{"view", "0"}, {"mark", "1"}}, {}, {"mark_type", "bar"});
  CHECK(score_relevance(f) == doctest::Approx(1.0 / 3.0));

  Feature u;
  u.components = {f.components[0]};
  CHECK(score_relevance(u) == 1.0);
}

TEST_CASE("distribution metrics from a hand-checked vector") {
  // pairs: (1,0) (2,1) (0,0) (0,3) (1,0)
  FrequencyVector v{{1, 2, 0, 0, 1}, {0, 1, 0, 3, 0}};
  auto d = score_distribution(v);
  CHECK(d.appearance == 4);
  CHECK(d.difference == 3);
  // support: pos 3/5, neg 2/5
  CHECK(d.gap == doctest::Approx(0.2));
  REQUIRE(d.ratio);
  CHECK(*d.ratio == doctest::Approx(1.5));

  auto one = score_distribution({{1, 0}, {0, 0}});
  CHECK_FALSE(one.ratio);
  CHECK(one.gap == doctest::Approx(0.5));
}

TEST_CASE("topic rows are distributions and fits are reproducible") {
  auto cat = small_catalog();
  auto vocab = ungrounded_unaries(cat);
  REQUIRE(vocab.size() > 3);
  TopicOptions o;
  o.iterations = 50;
  auto a = fit_topics(cat, vocab, 4, 9, o);
  auto b = fit_topics(cat, vocab, 4, 9, o);
  CHECK(a.phi == b.phi);
  REQUIRE(a.phi.size() == 4);
  for (const auto& row : a.phi) {
    double s = 0;
    for (double x : row) {
      CHECK(x > 0);
      s += x;
    }
    CHECK(s == doctest::Approx(1.0));
  }
  CHECK(a.word(vocab[2]) == std::optional<std::size_t>(2));
  CHECK_THROWS_AS(fit_topics(cat, vocab, 1, 0, o), Error);
  CHECK_THROWS_AS(fit_topics(cat, {}, 4, 0, o), Error);
}

TEST_CASE("lda score of a combination is the best mean topic weight") {
  auto cat = small_catalog();
  TopicOptions o;
  o.iterations = 20;
  auto model = fit_topics(cat, ungrounded_unaries(cat), 3, 1, o);
  int checked = 0;
  for (const auto& f : cat.features()) {
    if (f.is_unary()) {
      CHECK(score_lda(f, cat, model) == 1.0);
      continue;
    }
    std::vector<std::size_t> words;
    for (const auto& c : f.components) {
      KeyValueChain w = c;
      w.negated = false;
      w = w.ungrounded(0);
      auto id = cat.find({w});
      REQUIRE(id);
      words.push_back(*model.word(*id));
    }
    double best = 0;
    for (int k = 0; k < 3; ++k) {
      double s = 0;
      for (auto w : words) s += model.phi[static_cast<std::size_t>(k)][w];
      best = std::max(best, s / static_cast<double>(words.size()));
    }
    CHECK(score_lda(f, cat, model) == doctest::Approx(best));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("importance concentrates on the separating feature") {
  auto corpus = planted_corpus(30, 5, 4);
  auto schema = test_schema();
  auto cat = build_catalog(extract_chains(corpus, schema, 0, Exec::Serial), schema, {1, 1000000, Exec::Serial});
  auto vocab = ungrounded_unaries(cat);
  BoostingOptions o;
  o.rounds = 20;
  o.exec = Exec::Serial;
  auto imp = fit_importance(cat, vocab, o);
  int best = -1;
  double top = -1;
  for (int id : vocab)
    if (imp.at(id) > top) top = imp.at(id), best = id;
  CHECK(top == 1.0);
  CHECK(cat[best].components[0].terminal.key == kPlantedKey);

  o.exec = Exec::Parallel;
  auto par = fit_importance(cat, vocab, o);
  for (int id : vocab) CHECK(par.at(id) == imp.at(id));
}

TEST_CASE("dominance is min over max component importance") {
  auto cat = small_catalog();
  auto vocab = ungrounded_unaries(cat);
  BoostingOptions o;
  o.rounds = 10;
  auto imp = fit_importance(cat, vocab, o);
  for (const auto& f : cat.features()) {
    if (f.is_unary()) continue;
    std::vector<double> xs;
    for (const auto& c : f.components) {
      auto id = cat.find({c.positive().ungrounded(0)});
      xs.push_back(id ? imp.at(*id) : 0.0);
    }
    const double hi = *std::max_element(xs.begin(), xs.end());
    const double want = hi > 0 ? *std::min_element(xs.begin(), xs.end()) / hi : 0.0;
    CHECK(score_dominance(f, cat, imp) == doctest::Approx(want));
  }
}

TEST_CASE("normalized sum matches a direct min-max computation") {
  auto cat = small_catalog();
  MetricOptions mo;
  mo.numTopics = 3;
  mo.topics.iterations = 20;
  mo.boosting.rounds = 10;
  auto table = compute_metrics(cat, mo);
  const std::set<Metric> ablate{Metric::Gap};
  auto order = rank_candidates(cat, table, ablate);

  const double P = static_cast<double>(cat.pairs());
  std::vector<std::vector<double>> cols(7);
  for (const auto& r : table.rows) {
    cols[0].push_back(r.relevance);
    cols[1].push_back(r.ldaScore);
    cols[2].push_back(-r.specificity);
    cols[3].push_back(r.dominance);
    cols[4].push_back(r.appearanceCount / P);
    cols[5].push_back(r.differenceCount / P);
    cols[6].push_back(std::log(r.determinanceRatio));
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    double s = 0;
    for (const auto& c : cols) {
      auto [lo, hi] = std::minmax_element(c.begin(), c.end());
      s += *hi > *lo ? (c[i] - *lo) / (*hi - *lo) : 1.0;
    }
    CHECK(table.rows[i].normalizedSum == doctest::Approx(s));
  }

  REQUIRE(order.size() == cat.size());
  std::vector<std::size_t> pos(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[static_cast<std::size_t>(order[i])] = i;
  for (const auto& f : cat.features())
    for (int d : f.dependsOn) CHECK(pos[static_cast<std::size_t>(d)] < pos[static_cast<std::size_t>(f.id)]);
  // among features without dependencies the order is by sum
  std::vector<int> roots;
  for (int id : order)
    if (cat[id].dependsOn.empty()) roots.push_back(id);
  for (std::size_t i = 1; i < roots.size(); ++i)
    CHECK(table.rows[static_cast<std::size_t>(roots[i - 1])].normalizedSum >=
          table.rows[static_cast<std::size_t>(roots[i])].normalizedSum);
}

TEST_CASE("one-sided features take the largest finite ratio") {
  auto cat = small_catalog();
  MetricOptions mo;
  mo.numTopics = 2;
  mo.topics.iterations = 5;
  mo.boosting.rounds = 2;
  auto table = compute_metrics(cat, mo);
  double maxFinite = 1.0;
  for (const auto& f : cat.features())
    if (auto r = score_distribution(f.vector).ratio) maxFinite = std::max(maxFinite, *r);
  for (const auto& f : cat.features())
    if (!score_distribution(f.vector).ratio)
      CHECK(table.rows[static_cast<std::size_t>(f.id)].determinanceRatio == maxFinite);
}

TEST_CASE("metric names round-trip and csv has one row per feature") {
  for (auto m : kAllMetrics) CHECK(metric_from_name(to_string(m)) == m);
  CHECK_THROWS_AS(metric_from_name("bogus"), Error);
  auto cat = small_catalog(3, 4);
  MetricOptions mo;
  mo.numTopics = 2;
  mo.topics.iterations = 5;
  mo.boosting.rounds = 2;
  auto table = compute_metrics(cat, mo);
  rank_candidates(cat, table, {});
  auto csv = metrics_csv(cat, table);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(cat.size() + 1));
}

TEST_CASE("planted feature ranks in the top decile") {
  auto corpus = planted_corpus(60, 20, 12);
  auto schema = test_schema();
  auto cat = build_catalog(extract_chains(corpus, schema, 0), schema, {2, 1000000, Exec::Parallel});
  MetricOptions mo;
  mo.numTopics = 10;
  mo.topics.iterations = 100;
  auto table = compute_metrics(cat, mo);
  rank_candidates(cat, table, {});
  std::vector<double> sums;
  for (const auto& r : table.rows) sums.push_back(r.normalizedSum);
  std::sort(sums.rbegin(), sums.rend());
  const double decile = sums[sums.size() / 10];
  bool found = false;
  for (const auto& f : cat.features())
    if (f.is_unary() && f.components[0].terminal.key == kPlantedKey) {
      found = true;
      CHECK(table.rows[static_cast<std::size_t>(f.id)].normalizedSum >= decile);
    }
  CHECK(found);
  for (const auto& r : table.rows) CHECK(r.determinanceRatio >= 1.0);
  for (const auto& [id, v] : table.importance.importance) CHECK(v >= 0.0);
}
