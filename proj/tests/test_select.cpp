// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <numeric>
#include <random>
#include <sstream>

#include "kbsynth/select.hpp"

using namespace kbsynth;

namespace {

constexpr std::size_t P = 40;

FeatureCatalog controlled(std::size_t noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureCatalog cat;
  cat.set_pairs(P);
  auto add = [&](const std::string& name, auto gen) {
    Feature f;
    KeyValueChain c;
    c.terminal = {name, ""};
    f.components = {c};
    f.vector = FrequencyVector::zeros(P);
    for (std::size_t i = 0; i < P; ++i) {
      const int d = gen(i);
      (d >= 0 ? f.vector.pos[i] : f.vector.neg[i]) = std::abs(d);
    }
    cat.insert(f);
  };
  add("signal", [](std::size_t) { return 1; });
  for (std::size_t j = 0; j < noise; ++j)
    add("noise" + std::to_string(j), [&](std::size_t) { return static_cast<int>(rng() % 3) - 1; });
  return cat;
}

SelectionContext context(const FeatureCatalog& cat) {
  SelectionContext ctx;
  ctx.catalog = &cat;
  ctx.pairs.resize(P);
  std::iota(ctx.pairs.begin(), ctx.pairs.end(), 0);
  ctx.foldOf = assign_folds(std::vector<int>(P, -2), 5);
  return ctx;
}

MetricTable sums(const std::vector<double>& s) {
  MetricTable t;
  t.rows.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) t.rows[i].normalizedSum = s[i];
  return t;
}

// Replays the decision rule and counters from the trace alone.
std::string replay(const SelectionTrace& trace, const SelectionConfig& c) {
  std::ostringstream err;
  double best = trace.records.at(0).cvMean;
  std::size_t size = trace.records[0].selectedSize;
  int conv = 0, miss = 0;
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    if (r.iteration != i) err << "iteration " << i << ";";
    if (r.priorMean != best) err << "prior " << i << ";";
    const bool ok = r.cvMean - best > c.improvementThreshold && r.cvStdErr <= c.varianceThreshold;
    if (r.phase == "forward") {
      if (ok != (r.decision == Decision::Added)) err << "decision " << i << ";";
      if (r.metricSum < c.metricLowerBound) err << "bound " << i << ";";
      if (ok) {
        best = r.cvMean;
        ++size;
        conv = miss = 0;
      } else {
        ++miss;
        conv = std::abs(r.cvMean - best) < c.convergenceThreshold ? conv + 1 : 0;
      }
      if (conv > c.convergenceCount + 0 && i + 1 < trace.records.size() && trace.records[i + 1].phase == "forward")
        err << "missed convergence halt " << i << ";";
    } else {
      if (ok != (r.decision == Decision::Removed)) err << "decision " << i << ";";
      if (ok) {
        best = r.cvMean;
        size -= r.candidates.size();
      }
    }
    if (r.selectedSize != size) err << "size " << i << ";";
  }
  (void)miss;
  return err.str();
}

}  // namespace

TEST_CASE("defaults and config round-trip") {
  SelectionConfig c;
  CHECK(c.numTopics == 80);
  CHECK(c.initialSize == 30);
  CHECK(c.improvementThreshold == 0.001);
  CHECK(c.varianceThreshold == 0.05);
  CHECK(c.metricLowerBound == 2.0);
  CHECK(c.convergenceThreshold == 0.001);
  CHECK(c.convergenceCount == 200);
  CHECK(c.notSelectedCount == 3000);
  CHECK(c.maxFeatureSetSize == 500);
  CHECK(c.backwardIterationCap == 10000);

  c.ablatedMetrics = {Metric::Gap, Metric::Lda};
  c.seed = 12;
  auto back = selection_config_from_json(selection_config_to_json(c));
  CHECK(selection_config_to_json(back) == selection_config_to_json(c));

  CHECK_THROWS_AS(selection_config_from_json({{"initialSize", 600}}), Error);
  CHECK_THROWS_AS(selection_config_from_json({{"varianceThreshold", -1.0}}), Error);
  CHECK_THROWS_AS(selection_config_from_json({{"ablatedMetrics", {"nope"}}}), Error);
}

TEST_CASE("forward adds the signal and ignores noise") {
  auto cat = controlled(6, 1);
  auto ctx = context(cat);
  SelectionConfig c;
  c.initialSize = 1;
  c.metricLowerBound = 0.0;
  SelectionTrace trace;
  std::vector<int> ranked{1, 0, 2, 3, 4, 5, 6};
  auto state = initial_select(ranked, c, ctx, trace);
  CHECK(state.selected == std::vector<int>{1});
  forward_select(state, ranked, sums(std::vector<double>(7, 5.0)), c, ctx, trace);
  CHECK(trace.forwardHalt == "candidates_exhausted");
  REQUIRE(trace.records.size() >= 2);
  CHECK(trace.records[1].candidates == std::vector<int>{0});
  CHECK(trace.records[1].decision == Decision::Added);
  CHECK(state.bestCv.mean == 1.0);
  CHECK(replay(trace, c).empty());

  backward_select(state, c, ctx, trace);
  CHECK(state.selected == std::vector<int>{1, 0});  // removing noise does not improve on 1.0
  CHECK(trace.backwardHalt == "no_improving_subset");
  CHECK(replay(trace, c).empty());
}

TEST_CASE("metric lower bound halts forward selection") {
  auto cat = controlled(3, 2);
  auto ctx = context(cat);
  SelectionConfig c;
  c.initialSize = 1;
  c.metricLowerBound = 2.0;
  SelectionTrace trace;
  std::vector<int> ranked{0, 1, 2, 3};
  auto state = initial_select(ranked, c, ctx, trace);
  forward_select(state, ranked, sums({4, 3, 1.5, 1}), c, ctx, trace);
  CHECK(trace.forwardHalt == "metric_lower_bound");
  CHECK(trace.records.size() == 2);
}

TEST_CASE("not-selected and size limits halt forward selection") {
  auto cat = controlled(12, 3);
  auto ctx = context(cat);
  std::vector<int> ranked(13);
  std::iota(ranked.begin(), ranked.end(), 0);
  SelectionConfig c;
  c.initialSize = 1;
  c.metricLowerBound = 0;
  c.notSelectedCount = 2;
  SelectionTrace trace;
  auto state = initial_select(ranked, c, ctx, trace);
  forward_select(state, ranked, sums(std::vector<double>(13, 5)), c, ctx, trace);
  CHECK(trace.forwardHalt == "not_selected_count");
  CHECK(trace.records.size() == 1 + 3);

  c.notSelectedCount = 3000;
  c.convergenceCount = 1;
  SelectionTrace t2;
  state = initial_select(ranked, c, ctx, t2);
  forward_select(state, ranked, sums(std::vector<double>(13, 5)), c, ctx, t2);
  CHECK(t2.forwardHalt == "convergence");
  CHECK(replay(t2, c).empty());

  c.convergenceCount = 200;
  c.maxFeatureSetSize = 1;
  SelectionTrace t3;
  state = initial_select(ranked, c, ctx, t3);
  forward_select(state, ranked, sums(std::vector<double>(13, 5)), c, ctx, t3);
  CHECK(t3.forwardHalt == "max_feature_set_size");
}

TEST_CASE("backward removes harmful features and respects its cap") {
  auto cat = controlled(8, 4);
  auto ctx = context(cat);
  SelectionConfig c;
  SelectionTrace trace;
  auto state = initial_select({}, c, ctx, trace, std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8});
  const double before = state.bestCv.mean;
  backward_select(state, c, ctx, trace);
  CHECK(state.bestCv.mean >= before);
  CHECK(replay(trace, c).empty());
  for (const auto& r : trace.records)
    if (r.phase == "backward") CHECK_FALSE(r.candidates.empty());

  c.backwardIterationCap = 3;
  SelectionTrace t2;
  auto s2 = initial_select({}, c, ctx, t2, std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
  backward_select(s2, c, ctx, t2);
  std::size_t backward = 0;
  for (const auto& r : t2.records) backward += r.phase == "backward";
  CHECK(backward <= 3);
}

TEST_CASE("seeded features must exist") {
  auto cat = controlled(2, 5);
  auto ctx = context(cat);
  SelectionTrace trace;
  CHECK_THROWS_AS(initial_select({}, SelectionConfig{}, ctx, trace, std::vector<int>{0, 9}), Error);
}

TEST_CASE("full selection is deterministic and serial equals parallel") {
  auto cat = controlled(10, 6);
  SelectionConfig c;
  c.initialSize = 2;
  c.metricLowerBound = 0;
  c.seed = 3;
  MetricTable table;
  table.rows.resize(cat.size());
  for (std::size_t i = 0; i < cat.size(); ++i) table.rows[i].specificity = static_cast<int>(i % 4);
  auto ctx = context(cat);
  auto a = run_selection(cat, table, c, ctx);
  ctx.cv.exec = Exec::Serial;
  auto b = run_selection(cat, table, c, ctx);
  CHECK(trace_csv(a.trace) == trace_csv(b.trace));
  CHECK(selection_to_json(a, cat, c) == selection_to_json(b, cat, c));
  CHECK(replay(a.trace, c).empty());
}

TEST_CASE("trace csv layout") {
  SelectionTrace t;
  TraceRecord r;
  r.phase = "initial";
  r.candidates = {3, 1};
  r.cvMean = 0.5;
  r.decision = Decision::Initial;
  r.selectedSize = 2;
  t.records.push_back(r);
  t.forwardHalt = "convergence";
  t.backwardHalt = "iteration_cap";
  CHECK(trace_csv(t) ==
        "iteration,phase,candidates,metric_sum,cv_mean,cv_std_err,prior_mean,decision,selected_size\n"
        "0,initial,3 1,0,0.5,0,0,Initial,2\n"
        "halt,forward,convergence,,,,,,\n"
        "halt,backward,iteration_cap,,,,,,\n");
}

TEST_CASE("ablation suite runs once per metric plus a baseline") {
  auto cat = controlled(4, 7);
  auto ctx = context(cat);
  MetricTable table;
  table.rows.resize(cat.size());
  SelectionConfig c;
  c.initialSize = 1;
  c.metricLowerBound = 0;
  int calls = 0;
  auto runs = run_ablations(cat, table, c, ctx, [&](const SelectionResult&) { return ++calls * 0.1; });
  REQUIRE(runs.size() == 8);
  CHECK(runs[0].name == "none");
  CHECK(runs[1].name == "lda");
  CHECK(calls == 8);
  CHECK(runs[7].holdoutAccuracy == doctest::Approx(0.8));
}
