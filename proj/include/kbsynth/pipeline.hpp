// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbsynth/candidates.hpp"
#include "kbsynth/metrics.hpp"
#include "kbsynth/render.hpp"
#include "kbsynth/select.hpp"

namespace kbsynth {

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path schema;        // empty: built-in defaults
  std::filesystem::path derivedRules;  // empty: none
  std::filesystem::path outDir = "out";
  SelectionConfig selection;
  double holdoutFraction = 0.15;
  std::size_t folds = 5;
  int maxArity = 3;
  std::size_t maxFeatures = 2'000'000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Relative paths resolve against `baseDir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& baseDir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json pipeline_config_to_json(const PipelineConfig& config);

struct HoldoutSplit {
  std::vector<std::size_t> selection;  // corpus pair indices, ascending
  std::vector<std::size_t> holdout;
};

/// floor(fraction * P) holdout pairs: pinned pairs (fold hint -1) first, then
/// a seeded shuffle of the pairs without a fold hint.
HoldoutSplit split_holdout(const Corpus& corpus, double fraction, std::uint64_t seed);

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& pairs);

/// SHA-256 of a pair's canonical fact text.
std::string pair_hash(const DesignPair& pair);
std::string corpus_hash(const Corpus& corpus);

struct SelfCheck {
  std::string name;
  bool passed = true;
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::string detail;
};

struct FeatureReport {
  std::string name;
  double weight = 0.0;
  int appearance = 0;
  int difference = 0;
};

struct EvaluationReport {
  double cvMean = 0.0;
  double cvStdErr = 0.0;
  double trainingAccuracy = 0.0;
  double holdoutAccuracy = 0.0;
  std::size_t holdoutPairs = 0;
  std::size_t selectionPairs = 0;
  std::size_t selectedCount = 0;
  std::vector<FeatureReport> perFeature;
  std::vector<SelfCheck> checks;
};

/// Fraction of pairs whose positive design out-scores the negative one (ties wrong).
double pairwise_accuracy(const KnowledgeBase& kb, const Corpus& corpus, Diagnostics* diagnostics = nullptr,
                         Exec exec = Exec::Parallel);

/// Intermediate products of a pipeline run, kept for tests and the CLI.
struct PipelineRun {
  PipelineConfig config;
  Corpus corpus;
  HoldoutSplit split;
  Corpus selectionCorpus;
  Corpus holdoutCorpus;
  SchemaConfig schema;
  ExtractedCorpus extracted;
  std::optional<FeatureCatalog> catalog;
  std::optional<MetricTable> metrics;
  std::optional<SelectionResult> selection;
  std::optional<KnowledgeBase> kb;
  std::optional<EvaluationReport> report;
  nlohmann::json provenance;
};

enum class Stage { Extract, Select, Render, Evaluate };

struct RunOptions {
  Stage until = Stage::Evaluate;
  /// Ad-hoc mode: features to seed the selection with, resolved against the catalog.
  std::optional<nlohmann::json> initialFeatures;
  Exec exec = Exec::Parallel;
};

/// Loads inputs from the config paths and runs the stages in order.
PipelineRun run_pipeline(const PipelineConfig& config, const RunOptions& options = {});
/// Same, starting from an in-memory corpus and schema.
PipelineRun run_pipeline(const PipelineConfig& config, Corpus corpus, SchemaConfig schema,
                         const RunOptions& options = {});

SelectionContext selection_context(const PipelineRun& run, Exec exec);

/// Detection/vector agreement for the selected features on every selection design.
SelfCheck check_detection(const PipelineRun& run);
/// Sign of the weight-sum margin equals the classifier decision on every selection pair.
SelfCheck check_ranking(const PipelineRun& run);
/// Parses trace.csv text and replays the acceptance rule: a row is Added/Removed
/// iff it clears the improvement threshold and the variance bound against the
/// running best, which each row must report as its prior mean.
SelfCheck check_trace_csv(std::string_view csv, const SelectionConfig& config);

/// Features listed by canonical key or by component JSON, mapped to catalog ids.
std::vector<int> resolve_initial_features(const nlohmann::json& j, const FeatureCatalog& catalog);

nlohmann::json report_to_json(const EvaluationReport& report);

/// Writes the artifacts produced so far into config.outDir; returns file names written.
std::vector<std::string> write_artifacts(const PipelineRun& run);

}  // namespace kbsynth
