// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbsynth/learn.hpp"
#include "kbsynth/metrics.hpp"

namespace kbsynth {

struct SelectionConfig {
  int numTopics = 80;
  std::size_t initialSize = 30;
  double improvementThreshold = 0.001;
  double varianceThreshold = 0.05;
  double metricLowerBound = 2.0;
  double convergenceThreshold = 0.001;
  int convergenceCount = 200;
  int notSelectedCount = 3000;
  std::size_t maxFeatureSetSize = 500;
  int backwardIterationCap = 10000;
  std::uint64_t seed = 0;
  std::set<Metric> ablatedMetrics;

  void validate() const;
};

SelectionConfig selection_config_from_json(const nlohmann::json& j);
nlohmann::json selection_config_to_json(const SelectionConfig& config);

/// Everything the wrapper loop evaluates against; holdout pairs are not in it.
struct SelectionContext {
  const FeatureCatalog* catalog = nullptr;
  std::vector<std::size_t> pairs;
  std::vector<int> foldOf;
  CvOptions cv;

  CvReport evaluate(const std::vector<int>& features) const;
};

struct SelectionState {
  std::vector<int> selected;
  CvReport bestCv;
  std::size_t cursor = 0;
  int consecutiveConverging = 0;
  int consecutiveNotSelected = 0;
};

enum class Decision { Initial, Added, Ignored, Removed };
std::string_view to_string(Decision d);

struct TraceRecord {
  std::size_t iteration = 0;
  std::string phase;  // initial, forward, backward
  std::vector<int> candidates;
  double metricSum = 0.0;
  double cvMean = 0.0;
  double cvStdErr = 0.0;
  double priorMean = 0.0;
  Decision decision = Decision::Ignored;
  std::size_t selectedSize = 0;
};

struct SelectionTrace {
  std::vector<TraceRecord> records;
  std::string forwardHalt;
  std::string backwardHalt;
};

/// Top `initialSize` ranked ids, or `seed` features when given (ad-hoc mode).
SelectionState initial_select(const std::vector<int>& ranked, const SelectionConfig& config,
                              const SelectionContext& ctx, SelectionTrace& trace,
                              const std::optional<std::vector<int>>& seedFeatures = std::nullopt);

void forward_select(SelectionState& state, const std::vector<int>& ranked, const MetricTable& metrics,
                    const SelectionConfig& config, const SelectionContext& ctx, SelectionTrace& trace);

void backward_select(SelectionState& state, const SelectionConfig& config, const SelectionContext& ctx,
                     SelectionTrace& trace);

struct SelectionResult {
  SelectionState state;
  SelectionTrace trace;
  LinearModel model;  // trained on every selection pair
  std::vector<int> ranked;
};

/// Ranking under the config's ablation set, then initial, forward and backward selection.
SelectionResult run_selection(const FeatureCatalog& catalog, MetricTable metrics, const SelectionConfig& config,
                              const SelectionContext& ctx,
                              const std::optional<std::vector<int>>& seedFeatures = std::nullopt);

struct AblationResult {
  std::string name;  // "none" or the ablated metric
  SelectionResult selection;
  double holdoutAccuracy = 0.0;
};

using HoldoutEvaluator = std::function<double(const SelectionResult&)>;

/// No-ablation run plus one run per ablatable metric.
std::vector<AblationResult> run_ablations(const FeatureCatalog& catalog, const MetricTable& metrics,
                                          const SelectionConfig& config, const SelectionContext& ctx,
                                          const HoldoutEvaluator& holdout,
                                          const std::optional<std::vector<int>>& seedFeatures = std::nullopt);

/// Metrics that ablation runs drop one at a time.
std::vector<Metric> ablatable_metrics();

std::string trace_csv(const SelectionTrace& trace);
nlohmann::json selection_to_json(const SelectionResult& result, const FeatureCatalog& catalog,
                                 const SelectionConfig& config);

}  // namespace kbsynth
