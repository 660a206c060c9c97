// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kbsynth/boosting.hpp"
#include "kbsynth/candidates.hpp"
#include "kbsynth/topics.hpp"

namespace kbsynth {

enum class Metric { Relevance, Lda, Specificity, Dominance, Appearance, Difference, Gap, Ratio };

inline constexpr std::array<Metric, 8> kAllMetrics{Metric::Relevance,  Metric::Lda,        Metric::Specificity,
                                                   Metric::Dominance,  Metric::Appearance, Metric::Difference,
                                                   Metric::Gap,        Metric::Ratio};

std::string_view to_string(Metric metric);
Metric metric_from_name(std::string_view name);

struct MetricVector {
  double relevance = 1.0;
  double ldaScore = 1.0;
  int specificity = 0;
  double dominance = 1.0;
  int appearanceCount = 0;
  int differenceCount = 0;
  double determinanceGap = 0.0;
  double determinanceRatio = 1.0;
  double normalizedSum = 0.0;
};

struct Distribution {
  int appearance = 0;
  int difference = 0;
  double gap = 0.0;
  /// nullopt when exactly one side has support (ratio unbounded).
  std::optional<double> ratio;
};

double score_relevance(const Feature& f);
int score_specificity(const Feature& f);
Distribution score_distribution(const FrequencyVector& v);

/// Un-grounded unary feature standing for a component in topic/importance lookups.
std::optional<int> component_word(const FeatureCatalog& catalog, const KeyValueChain& component);

double score_lda(const Feature& f, const FeatureCatalog& catalog, const TopicModel& model);
double score_dominance(const Feature& f, const FeatureCatalog& catalog, const ImportanceModel& model);

/// Un-grounded unary features: the LDA vocabulary and the importance columns.
std::vector<int> ungrounded_unaries(const FeatureCatalog& catalog);

struct MetricOptions {
  int numTopics = 80;
  std::uint64_t seed = 0;
  TopicOptions topics;
  BoostingOptions boosting;
  Exec exec = Exec::Parallel;
};

struct MetricTable {
  std::vector<MetricVector> rows;  // indexed by feature id
  TopicModel topics;
  ImportanceModel importance;
};

MetricTable compute_metrics(const FeatureCatalog& catalog, const MetricOptions& options);

/// Normalized sums (ablated metrics contribute 0) written into `table`; returns
/// ids in descending sum order, ties by lower id, with every dependency pulled
/// ahead of its dependents.
std::vector<int> rank_candidates(const FeatureCatalog& catalog, MetricTable& table,
                                 const std::set<Metric>& ablate);

std::string metrics_csv(const FeatureCatalog& catalog, const MetricTable& table);

}  // namespace kbsynth
