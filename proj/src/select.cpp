// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/select.hpp"

#include <algorithm>
#include <cmath>

#include "kbsynth/error.hpp"
#include "kbsynth/io.hpp"
#include "kbsynth/random.hpp"

namespace kbsynth {

namespace {

constexpr std::uint64_t kBackwardStream = 0x9e3779b97f4a7c15ULL;
constexpr double kEnumerateLimit = 100000.0;

double choose(std::size_t m, std::size_t n) {
  double c = 1.0;
  for (std::size_t i = 0; i < n; ++i) c = c * static_cast<double>(m - i) / static_cast<double>(i + 1);
  return c;
}

std::vector<std::vector<std::size_t>> all_subsets(std::size_t m, std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    std::size_t i = n;
    while (i > 0 && idx[i - 1] == m - n + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

std::vector<std::size_t> random_subset(std::size_t m, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> all(m);
  for (std::size_t i = 0; i < m; ++i) all[i] = i;
  for (std::size_t i = 0; i < n; ++i) std::swap(all[i], all[i + uniform_below(rng, m - i)]);
  all.resize(n);
  std::sort(all.begin(), all.end());
  return all;
}

bool accepts(const CvReport& cv, double bestMean, const SelectionConfig& config) {
  return cv.mean - bestMean > config.improvementThreshold && cv.stdError <= config.varianceThreshold;
}

}  // namespace

void SelectionConfig::validate() const {
  if (improvementThreshold < 0 || varianceThreshold < 0 || convergenceThreshold < 0 || metricLowerBound < 0)
    throw Error(ErrorKind::ConfigError, "selection thresholds must be non-negative");
  if (initialSize > maxFeatureSetSize)
    throw Error(ErrorKind::ConfigError, "initialSize exceeds maxFeatureSetSize");
  if (numTopics < 2) throw Error(ErrorKind::ConfigError, "numTopics must be at least 2");
  if (convergenceCount < 0 || notSelectedCount < 0 || backwardIterationCap < 0)
    throw Error(ErrorKind::ConfigError, "selection counts must be non-negative");
}

SelectionConfig selection_config_from_json(const nlohmann::json& j) {
  SelectionConfig c;
  try {
    c.numTopics = j.value("numTopics", c.numTopics);
    c.initialSize = j.value("initialSize", c.initialSize);
    c.improvementThreshold = j.value("improvementThreshold", c.improvementThreshold);
    c.varianceThreshold = j.value("varianceThreshold", c.varianceThreshold);
    c.metricLowerBound = j.value("metricLowerBound", c.metricLowerBound);
    c.convergenceThreshold = j.value("convergenceThreshold", c.convergenceThreshold);
    c.convergenceCount = j.value("convergenceCount", c.convergenceCount);
    c.notSelectedCount = j.value("notSelectedCount", c.notSelectedCount);
    c.maxFeatureSetSize = j.value("maxFeatureSetSize", c.maxFeatureSetSize);
    c.backwardIterationCap = j.value("backwardIterationCap", c.backwardIterationCap);
    c.seed = j.value("seed", c.seed);
    if (j.contains("ablatedMetrics"))
      for (const auto& m : j.at("ablatedMetrics")) c.ablatedMetrics.insert(metric_from_name(m.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("selection config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json selection_config_to_json(const SelectionConfig& c) {
  nlohmann::json ablated = nlohmann::json::array();
  for (auto m : c.ablatedMetrics) ablated.push_back(std::string(to_string(m)));
  return {{"numTopics", c.numTopics},
          {"initialSize", c.initialSize},
          {"improvementThreshold", c.improvementThreshold},
          {"varianceThreshold", c.varianceThreshold},
          {"metricLowerBound", c.metricLowerBound},
          {"convergenceThreshold", c.convergenceThreshold},
          {"convergenceCount", c.convergenceCount},
          {"notSelectedCount", c.notSelectedCount},
          {"maxFeatureSetSize", c.maxFeatureSetSize},
          {"backwardIterationCap", c.backwardIterationCap},
          {"seed", c.seed},
          {"ablatedMetrics", ablated}};
}

CvReport SelectionContext::evaluate(const std::vector<int>& features) const {
  return cross_validate(features, *catalog, pairs, foldOf, cv);
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Initial: return "Initial";
    case Decision::Added: return "Added";
    case Decision::Ignored: return "Ignored";
    case Decision::Removed: return "Removed";
  }
  return "unknown";
}

SelectionState initial_select(const std::vector<int>& ranked, const SelectionConfig& config,
                              const SelectionContext& ctx, SelectionTrace& trace,
                              const std::optional<std::vector<int>>& seedFeatures) {
  SelectionState state;
  if (seedFeatures) {
    for (int id : *seedFeatures) {
      if (id < 0 || static_cast<std::size_t>(id) >= ctx.catalog->size())
        throw Error(ErrorKind::UnknownFeature, "initial feature " + std::to_string(id) + " not in catalog");
      if (std::find(state.selected.begin(), state.selected.end(), id) == state.selected.end())
        state.selected.push_back(id);
    }
    if (state.selected.size() > config.maxFeatureSetSize)
      throw Error(ErrorKind::ConfigError, "initial feature set exceeds maxFeatureSetSize");
  } else {
    const std::size_t n = std::min(config.initialSize, ranked.size());
    state.selected.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n));
    state.cursor = n;
  }
  state.bestCv = ctx.evaluate(state.selected);
  TraceRecord r;
  r.phase = "initial";
  r.candidates = state.selected;
  r.cvMean = state.bestCv.mean;
  r.cvStdErr = state.bestCv.stdError;
  r.decision = Decision::Initial;
  r.selectedSize = state.selected.size();
  trace.records.push_back(std::move(r));
  return state;
}

void forward_select(SelectionState& state, const std::vector<int>& ranked, const MetricTable& metrics,
                    const SelectionConfig& config, const SelectionContext& ctx, SelectionTrace& trace) {
  std::set<int> chosen(state.selected.begin(), state.selected.end());
  trace.forwardHalt = "candidates_exhausted";
  while (state.cursor < ranked.size()) {
    if (state.selected.size() >= config.maxFeatureSetSize) {
      trace.forwardHalt = "max_feature_set_size";
      return;
    }
    const int candidate = ranked[state.cursor++];
    if (chosen.count(candidate)) continue;
    const double sum = metrics.rows[static_cast<std::size_t>(candidate)].normalizedSum;
    if (sum < config.metricLowerBound) {
      trace.forwardHalt = "metric_lower_bound";
      return;
    }
    auto trial = state.selected;
    trial.push_back(candidate);
    const CvReport cv = ctx.evaluate(trial);

    TraceRecord r;
    r.iteration = trace.records.size();
    r.phase = "forward";
    r.candidates = {candidate};
    r.metricSum = sum;
    r.cvMean = cv.mean;
    r.cvStdErr = cv.stdError;
    r.priorMean = state.bestCv.mean;
    const double delta = cv.mean - state.bestCv.mean;
    if (accepts(cv, state.bestCv.mean, config)) {
      r.decision = Decision::Added;
      state.selected = std::move(trial);
      chosen.insert(candidate);
      state.bestCv = cv;
      state.consecutiveConverging = 0;
      state.consecutiveNotSelected = 0;
    } else {
      r.decision = Decision::Ignored;
      ++state.consecutiveNotSelected;
      state.consecutiveConverging = std::abs(delta) < config.convergenceThreshold ? state.consecutiveConverging + 1 : 0;
    }
    r.selectedSize = state.selected.size();
    trace.records.push_back(std::move(r));

    if (state.consecutiveConverging > config.convergenceCount) {
      trace.forwardHalt = "convergence";
      return;
    }
    if (state.consecutiveNotSelected > config.notSelectedCount) {
      trace.forwardHalt = "not_selected_count";
      return;
    }
  }
  if (state.selected.size() >= config.maxFeatureSetSize) trace.forwardHalt = "max_feature_set_size";
}

void backward_select(SelectionState& state, const SelectionConfig& config, const SelectionContext& ctx,
                     SelectionTrace& trace) {
  std::mt19937_64 rng(config.seed ^ kBackwardStream);
  int tested = 0;
  trace.backwardHalt = "no_improving_subset";
  bool restart = true;
  while (restart) {
    restart = false;
    const std::size_t m = state.selected.size();
    for (std::size_t n = 1; n < m && !restart; ++n) {
      const double total = choose(m, n);
      std::vector<std::vector<std::size_t>> order;
      std::size_t budget;
      if (total <= kEnumerateLimit) {
        order = all_subsets(m, n);
        stable_shuffle(order.begin(), order.end(), rng);
        budget = order.size();
      } else {
        budget = static_cast<std::size_t>(config.backwardIterationCap - tested);
      }
      std::set<std::vector<std::size_t>> seen;
      for (std::size_t k = 0; k < budget; ++k) {
        if (tested >= config.backwardIterationCap) {
          trace.backwardHalt = "iteration_cap";
          return;
        }
        std::vector<std::size_t> subset;
        if (!order.empty()) {
          subset = order[k];
        } else {
          do subset = random_subset(m, n, rng);
          while (!seen.insert(subset).second);
        }
        ++tested;
        std::vector<int> removed, kept;
        for (std::size_t i = 0, s = 0; i < m; ++i) {
          if (s < subset.size() && subset[s] == i) {
            removed.push_back(state.selected[i]);
            ++s;
          } else {
            kept.push_back(state.selected[i]);
          }
        }
        const CvReport cv = ctx.evaluate(kept);
        TraceRecord r;
        r.iteration = trace.records.size();
        r.phase = "backward";
        r.candidates = removed;
        r.cvMean = cv.mean;
        r.cvStdErr = cv.stdError;
        r.priorMean = state.bestCv.mean;
        if (accepts(cv, state.bestCv.mean, config)) {
          r.decision = Decision::Removed;
          state.selected = std::move(kept);
          state.bestCv = cv;
          restart = true;
        } else {
          r.decision = Decision::Ignored;
        }
        r.selectedSize = state.selected.size();
        trace.records.push_back(std::move(r));
        if (restart) break;
      }
    }
  }
}

SelectionResult run_selection(const FeatureCatalog& catalog, MetricTable metrics, const SelectionConfig& config,
                              const SelectionContext& ctx, const std::optional<std::vector<int>>& seedFeatures) {
  config.validate();
  SelectionResult result;
  result.ranked = rank_candidates(catalog, metrics, config.ablatedMetrics);
  result.state = initial_select(result.ranked, config, ctx, result.trace, seedFeatures);
  forward_select(result.state, result.ranked, metrics, config, ctx, result.trace);
  if (!result.state.selected.empty()) backward_select(result.state, config, ctx, result.trace);
  result.model = train(build_matrix(result.state.selected, catalog, ctx.pairs), ctx.cv.train);
  return result;
}

std::vector<Metric> ablatable_metrics() {
  return {Metric::Lda, Metric::Specificity, Metric::Dominance, Metric::Appearance,
          Metric::Difference, Metric::Gap, Metric::Ratio};
}

std::vector<AblationResult> run_ablations(const FeatureCatalog& catalog, const MetricTable& metrics,
                                          const SelectionConfig& config, const SelectionContext& ctx,
                                          const HoldoutEvaluator& holdout,
                                          const std::optional<std::vector<int>>& seedFeatures) {
  std::vector<std::pair<std::string, std::set<Metric>>> runs{{"none", {}}};
  for (auto m : ablatable_metrics()) runs.push_back({std::string(to_string(m)), {m}});
  std::vector<AblationResult> out;
  for (auto& [name, ablate] : runs) {
    SelectionConfig c = config;
    c.ablatedMetrics = ablate;
    AblationResult r;
    r.name = name;
    r.selection = run_selection(catalog, metrics, c, ctx, seedFeatures);
    r.holdoutAccuracy = holdout ? holdout(r.selection) : 0.0;
    out.push_back(std::move(r));
  }
  return out;
}

std::string trace_csv(const SelectionTrace& trace) {
  std::string out = "iteration,phase,candidates,metric_sum,cv_mean,cv_std_err,prior_mean,decision,selected_size\n";
  for (const auto& r : trace.records) {
    std::string ids;
    for (int id : r.candidates) ids += (ids.empty() ? "" : " ") + std::to_string(id);
    out += std::to_string(r.iteration) + "," + r.phase + "," + ids + "," + format_double(r.metricSum) + "," +
           format_double(r.cvMean) + "," + format_double(r.cvStdErr) + "," + format_double(r.priorMean) + "," +
           std::string(to_string(r.decision)) + "," + std::to_string(r.selectedSize) + "\n";
  }
  out += "halt,forward," + trace.forwardHalt + ",,,,,,\n";
  out += "halt,backward," + trace.backwardHalt + ",,,,,,\n";
  return out;
}

nlohmann::json selection_to_json(const SelectionResult& result, const FeatureCatalog& catalog,
                                 const SelectionConfig& config) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < result.state.selected.size(); ++i) {
    const Feature& f = catalog[result.state.selected[i]];
    features.push_back({{"id", f.id},
                        {"key", f.canonical()},
                        {"level", to_string(f.level)},
                        {"components", components_to_json(f.components)},
                        {"weight", result.model.weights[static_cast<Eigen::Index>(i)]}});
  }
  return {{"selected", features},
          {"config", selection_config_to_json(config)},
          {"halting", {{"forward", result.trace.forwardHalt}, {"backward", result.trace.backwardHalt}}},
          {"cv",
           {{"mean", result.state.bestCv.mean},
            {"stdError", result.state.bestCv.stdError},
            {"folds", result.state.bestCv.foldAccuracies}}},
          {"training",
           {{"loss", result.model.meta.loss},
            {"gradNorm", result.model.meta.gradNorm},
            {"iterations", result.model.meta.iterations},
            {"converged", result.model.meta.converged}}}};
}

}  // namespace kbsynth
