// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP kernels on a fixed random corpus.

#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "kbsynth/boosting.hpp"
#include "kbsynth/candidates.hpp"
#include "kbsynth/learn.hpp"
#include "kbsynth/render.hpp"
#include "synthetic.hpp"

using namespace kbsynth;

namespace {

struct Fixture {
  SchemaConfig schema = testing::test_schema();
  Corpus corpus;
  ExtractedCorpus extracted;
  FeatureCatalog catalog;
  std::vector<int> unaries;
  KnowledgeBase kb;
  std::vector<DesignAst> asts;

  Fixture() {
    std::mt19937_64 rng(7);
    testing::RandomCorpusOptions o;
    o.pairs = 200;
    o.maxMarks = 2;
    corpus = testing::random_corpus(rng, o);
    extracted = extract_chains(corpus, schema, 7, Exec::Serial);
    catalog = build_catalog(extracted, schema, {2, 2'000'000, Exec::Serial});
    for (const auto& f : catalog.features())
      if (f.is_unary()) unaries.push_back(f.id);
    const RenderContext ctx{schema, extracted.registry, extracted.boundaries};
    std::vector<int> some(unaries.begin(), unaries.begin() + std::min<std::size_t>(20, unaries.size()));
    kb = render_knowledge_base(some, catalog, ctx);
    for (auto& r : kb.rules) r.weight = 1.0;
    for (const auto& p : corpus.pairs) {
      asts.push_back(p.positive);
      asts.push_back(p.negative);
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

Exec exec_of(const benchmark::State& s) { return s.range(0) ? Exec::Parallel : Exec::Serial; }

void BM_extract(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(extract_chains(f.corpus, f.schema, 7, exec_of(state)));
}

void BM_catalog(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(build_catalog(f.extracted, f.schema, {2, 2'000'000, exec_of(state)}));
}

void BM_cross_validate(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<std::size_t> pairs(f.catalog.pairs());
  std::iota(pairs.begin(), pairs.end(), 0);
  const auto folds = assign_folds(std::vector<int>(pairs.size(), -2), 5);
  std::vector<int> feats(f.unaries.begin(), f.unaries.begin() + std::min<std::size_t>(30, f.unaries.size()));
  CvOptions o;
  o.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(cross_validate(feats, f.catalog, pairs, folds, o));
}

void BM_importance(benchmark::State& state) {
  const auto& f = fixture();
  BoostingOptions o;
  o.rounds = 20;
  o.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(fit_importance(f.catalog, f.unaries, o));
}

void BM_rank_designs(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(rank_designs(f.kb, f.asts, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_extract)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_catalog)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_cross_validate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_importance)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rank_designs)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
