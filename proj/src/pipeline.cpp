// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "kbsynth/error.hpp"
#include "kbsynth/io.hpp"
#include "kbsynth/random.hpp"

namespace kbsynth {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace

void PipelineConfig::validate() const {
  if (!(holdoutFraction >= 0.0 && holdoutFraction < 1.0))
    throw Error(ErrorKind::ConfigError, "holdoutFraction must lie in [0,1)");
  if (folds < 2) throw Error(ErrorKind::ConfigError, "folds must be at least 2");
  if (maxArity < 1) throw Error(ErrorKind::ConfigError, "maxArity must be at least 1");
  selection.validate();
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& baseDir) {
  PipelineConfig c;
  try {
    const auto paths = j.value("paths", nlohmann::json::object());
    c.corpus = resolve(baseDir, paths.value("corpus", ""));
    c.schema = resolve(baseDir, paths.value("schema", ""));
    c.derivedRules = resolve(baseDir, paths.value("derivedRules", ""));
    c.outDir = resolve(baseDir, paths.value("outDir", "out"));
    if (j.contains("selection")) c.selection = selection_config_from_json(j.at("selection"));
    c.holdoutFraction = j.value("holdoutFraction", c.holdoutFraction);
    c.folds = j.value("folds", c.folds);
    c.maxArity = j.value("maxArity", c.maxArity);
    c.maxFeatures = j.value("maxFeatures", c.maxFeatures);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("pipeline config: ") + e.what());
  }
  c.selection.seed = c.seed;
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j, path.parent_path());
}

nlohmann::json pipeline_config_to_json(const PipelineConfig& c) {
  return {{"paths",
           {{"corpus", c.corpus.string()},
            {"schema", c.schema.string()},
            {"derivedRules", c.derivedRules.string()},
            {"outDir", c.outDir.string()}}},
          {"selection", selection_config_to_json(c.selection)},
          {"holdoutFraction", c.holdoutFraction},
          {"folds", c.folds},
          {"maxArity", c.maxArity},
          {"maxFeatures", c.maxFeatures},
          {"seed", c.seed}};
}

HoldoutSplit split_holdout(const Corpus& corpus, double fraction, std::uint64_t seed) {
  const std::size_t P = corpus.size();
  const auto target = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(P)));
  std::vector<char> held(P, 0);
  std::size_t count = 0;
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < P; ++i) {
    const auto& hint = corpus.pairs[i].foldHint;
    if (hint && *hint == -1) {
      held[i] = 1;
      ++count;
    } else if (!hint) {
      free.push_back(i);
    }
  }
  std::mt19937_64 rng(seed);
  stable_shuffle(free.begin(), free.end(), rng);
  for (std::size_t k = 0; k < free.size() && count < target; ++k, ++count) held[free[k]] = 1;
  HoldoutSplit split;
  for (std::size_t i = 0; i < P; ++i) (held[i] ? split.holdout : split.selection).push_back(i);
  return split;
}

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& pairs) {
  Corpus out;
  for (auto i : pairs) out.pairs.push_back(corpus.pairs.at(i));
  return out;
}

std::string pair_hash(const DesignPair& pair) {
  return sha256_hex(emit_facts(pair.positive) + "\n%%\n" + emit_facts(pair.negative));
}

std::string corpus_hash(const Corpus& corpus) {
  std::string all;
  for (const auto& p : corpus.pairs) all += pair_hash(p) + "\n";
  return sha256_hex(all);
}

double pairwise_accuracy(const KnowledgeBase& kb, const Corpus& corpus, Diagnostics* diagnostics, Exec exec) {
  if (corpus.size() == 0) return 0.0;
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
  std::vector<char> correct(corpus.size(), 0);
  std::vector<Diagnostics> diags(corpus.size());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::Parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& pair = corpus.pairs[static_cast<std::size_t>(i)];
    auto& d = diags[static_cast<std::size_t>(i)];
    const auto a = detect_all(kb, design_chains(pair.positive, kb.context, &d));
    const auto b = detect_all(kb, design_chains(pair.negative, kb.context, &d));
    correct[static_cast<std::size_t>(i)] = preference_margin(kb, a, b) > 0;
  }
  if (diagnostics)
    for (auto& d : diags)
      for (auto& w : d.warnings) diagnostics->warn(w);
  std::size_t hits = 0;
  for (char c : correct) hits += static_cast<std::size_t>(c);
  return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

SelectionContext selection_context(const PipelineRun& run, Exec exec) {
  SelectionContext ctx;
  ctx.catalog = &*run.catalog;
  std::vector<int> hints;
  for (std::size_t i = 0; i < run.selectionCorpus.size(); ++i) {
    ctx.pairs.push_back(i);
    hints.push_back(run.selectionCorpus.pairs[i].foldHint.value_or(-1));
  }
  ctx.foldOf = assign_folds(hints, run.config.folds);
  ctx.cv.folds = run.config.folds;
  ctx.cv.exec = exec;
  return ctx;
}

SelfCheck check_detection(const PipelineRun& run) {
  SelfCheck check{"detection_consistency", true, 0, 0, ""};
  const auto& selected = run.selection->state.selected;
  const auto& ctx = run.kb->context;
  const std::size_t designs = run.selectionCorpus.size() * 2;
  std::vector<ChainBag> bags(designs);
  const auto n = static_cast<std::ptrdiff_t>(designs);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t d = 0; d < n; ++d)
    bags[static_cast<std::size_t>(d)] = design_chains(run.selectionCorpus.design(static_cast<std::size_t>(d)), ctx);
  for (int id : selected) {
    const Feature& f = (*run.catalog)[id];
    for (std::size_t d = 0; d < designs; ++d) {
      ++check.checked;
      const Count got = count_pattern(f.components, bags[d]);
      if (got != f.vector.at_design(d)) {
        if (check.violations++ == 0)
          check.detail = "feature " + f.canonical() + " design " + std::to_string(d) + ": detected " +
                         std::to_string(got) + ", vector " + std::to_string(f.vector.at_design(d));
      }
    }
  }
  check.passed = check.violations == 0;
  return check;
}

SelfCheck check_ranking(const PipelineRun& run) {
  SelfCheck check{"ranking_equivalence", true, 0, 0, ""};
  const auto& kb = *run.kb;
  const auto& model = run.selection->model;
  const auto matrix = build_matrix(run.selection->state.selected, *run.catalog,
                                   selection_context(run, Exec::Serial).pairs);
  for (std::size_t i = 0; i < run.selectionCorpus.size(); ++i) {
    const auto& pair = run.selectionCorpus.pairs[i];
    const auto a = detect_all(kb, design_chains(pair.positive, kb.context));
    const auto b = detect_all(kb, design_chains(pair.negative, kb.context));
    const double margin = preference_margin(kb, a, b);
    const double decision = model.decision(matrix.X.row(static_cast<Eigen::Index>(i)));
    ++check.checked;
    auto sign = [](double x) { return (x > 0) - (x < 0); };
    if (sign(margin) != sign(decision)) {
      if (check.violations++ == 0)
        check.detail = "pair " + std::to_string(i) + ": margin " + format_double(margin) + ", classifier " +
                       format_double(decision);
    }
  }
  check.passed = check.violations == 0;
  return check;
}

SelfCheck check_trace_csv(std::string_view csv, const SelectionConfig& config) {
  SelfCheck check{"trace_invariants", true, 0, 0, ""};
  auto violation = [&](const std::string& what) {
    if (check.violations++ == 0) check.detail = what;
  };
  static const std::set<std::string> forwardHalts{"candidates_exhausted", "max_feature_set_size",
                                                  "metric_lower_bound", "convergence", "not_selected_count"};
  static const std::set<std::string> backwardHalts{"no_improving_subset", "iteration_cap"};
  std::istringstream in{std::string(csv)};
  std::string line;
  std::getline(in, line);
  std::optional<double> best;
  int halts = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!cells.empty() && cells[0] == "halt") {
      ++halts;
      const auto& known = cells.size() > 1 && cells[1] == "forward" ? forwardHalts : backwardHalts;
      if (cells.size() < 3 || !known.count(cells[2])) violation("unknown halt row: " + line);
      continue;
    }
    if (cells.size() < 9) {
      violation("short row: " + line);
      continue;
    }
    ++check.checked;
    const std::string& decision = cells[7];
    const double mean = std::strtod(cells[4].c_str(), nullptr);
    const double stdErr = std::strtod(cells[5].c_str(), nullptr);
    const double prior = std::strtod(cells[6].c_str(), nullptr);
    if (decision == "Initial") {
      best = mean;
      continue;
    }
    if (!best) {
      violation("iteration " + cells[0] + " precedes the initial row");
      continue;
    }
    if (prior != *best) violation("iteration " + cells[0] + " prior mean is not the running best");
    const bool qualifies = mean - prior > config.improvementThreshold && stdErr <= config.varianceThreshold;
    const bool accepted = decision == "Added" || decision == "Removed";
    if (accepted != qualifies) violation("iteration " + cells[0] + " " + decision);
    if (accepted) best = mean;
  }
  if (halts != 2) violation("expected two halt rows");
  check.passed = check.violations == 0;
  return check;
}

std::vector<int> resolve_initial_features(const nlohmann::json& j, const FeatureCatalog& catalog) {
  const auto& list = j.is_object() && j.contains("selected") ? j.at("selected") : j;
  if (!list.is_array()) throw Error(ErrorKind::ConfigError, "initial features must be a JSON array");
  std::map<std::string, int> byKey;
  for (const auto& f : catalog.features()) byKey.emplace(f.canonical(), f.id);
  std::vector<int> ids;
  for (const auto& item : list) {
    std::optional<int> id;
    std::string label;
    if (item.is_string()) {
      label = item.get<std::string>();
      auto it = byKey.find(label);
      if (it != byKey.end()) id = it->second;
    } else {
      const auto& comps = item.is_object() ? item.at("components") : item;
      auto key = components_from_json(comps);
      label = comps.dump();
      id = catalog.find(key);
    }
    if (!id) throw Error(ErrorKind::UnknownFeature, "initial feature not in catalog: " + label);
    ids.push_back(*id);
  }
  return ids;
}

PipelineRun run_pipeline(const PipelineConfig& config, Corpus corpus, SchemaConfig schema,
                         const RunOptions& options) {
  config.validate();
  PipelineRun run;
  run.config = config;
  run.config.selection.seed = config.seed;
  run.corpus = std::move(corpus);
  run.schema = std::move(schema);
  if (run.corpus.size() == 0) throw Error(ErrorKind::DegenerateCorpus, "corpus has no pairs");

  run.split = split_holdout(run.corpus, config.holdoutFraction, config.seed);
  run.selectionCorpus = subset(run.corpus, run.split.selection);
  run.holdoutCorpus = subset(run.corpus, run.split.holdout);
  if (run.selectionCorpus.size() < config.folds)
    throw Error(ErrorKind::FoldTooSmall, "fewer selection pairs than folds");

  auto hashed = pipeline_config_to_json(run.config);
  hashed["paths"].erase("outDir");
  run.provenance = {{"configHash", sha256_hex(hashed.dump())},
                    {"corpusHash", corpus_hash(run.corpus)},
                    {"schemaHash", sha256_hex(schema_to_json(run.schema).dump())},
                    {"seed", config.seed}};

  run.extracted = extract_chains(run.selectionCorpus, run.schema, config.seed, options.exec);
  run.catalog = build_catalog(run.extracted, run.schema, {config.maxArity, config.maxFeatures, options.exec});

  MetricOptions mo;
  mo.numTopics = config.selection.numTopics;
  mo.seed = config.seed;
  mo.exec = options.exec;
  run.metrics = compute_metrics(*run.catalog, mo);
  rank_candidates(*run.catalog, *run.metrics, config.selection.ablatedMetrics);
  if (options.until == Stage::Extract) return run;

  const auto ctx = selection_context(run, options.exec);
  std::optional<std::vector<int>> seeded;
  if (options.initialFeatures) seeded = resolve_initial_features(*options.initialFeatures, *run.catalog);
  run.selection = run_selection(*run.catalog, *run.metrics, run.config.selection, ctx, seeded);
  if (options.until == Stage::Select) return run;

  RenderContext rc{run.schema, run.extracted.registry, run.extracted.boundaries};
  run.kb = render_knowledge_base(run.selection->state.selected, *run.catalog, rc);
  assign_weights(*run.kb, run.selection->model);
  run.kb->provenance = run.provenance;
  run.kb->provenance["model"] = {{"loss", run.selection->model.meta.loss},
                                 {"iterations", run.selection->model.meta.iterations},
                                 {"converged", run.selection->model.meta.converged},
                                 {"gradNorm", run.selection->model.meta.gradNorm}};
  if (options.until == Stage::Render) return run;

  EvaluationReport report;
  const auto& sel = *run.selection;
  report.cvMean = sel.state.bestCv.mean;
  report.cvStdErr = sel.state.bestCv.stdError;
  report.trainingAccuracy = accuracy(sel.model, build_matrix(sel.state.selected, *run.catalog, ctx.pairs));
  Diagnostics holdoutDiag;
  report.holdoutAccuracy = pairwise_accuracy(*run.kb, run.holdoutCorpus, &holdoutDiag, options.exec);
  report.holdoutPairs = run.holdoutCorpus.size();
  report.selectionPairs = run.selectionCorpus.size();
  report.selectedCount = sel.state.selected.size();
  for (std::size_t i = 0; i < run.kb->rules.size(); ++i) {
    const auto dist = score_distribution((*run.catalog)[sel.state.selected[i]].vector);
    report.perFeature.push_back({run.kb->rules[i].name, run.kb->rules[i].weight, dist.appearance, dist.difference});
  }
  report.checks.push_back(check_detection(run));
  report.checks.push_back(check_ranking(run));
  report.checks.push_back(check_trace_csv(trace_csv(sel.trace), run.config.selection));

  SelfCheck disjoint{"holdout_disjoint", true, 0, 0, ""};
  std::set<std::string> seen;
  for (const auto& p : run.selectionCorpus.pairs) seen.insert(pair_hash(p));
  for (const auto& p : run.holdoutCorpus.pairs) {
    ++disjoint.checked;
    if (seen.count(pair_hash(p))) ++disjoint.violations;
  }
  disjoint.passed = disjoint.violations == 0;
  if (!disjoint.passed) disjoint.detail = "holdout pairs duplicate selection pairs";
  report.checks.push_back(disjoint);
  run.report = std::move(report);
  return run;
}

PipelineRun run_pipeline(const PipelineConfig& config, const RunOptions& options) {
  Corpus corpus = load_corpus(config.corpus);
  if (!config.derivedRules.empty()) corpus = apply_derived_rules(corpus, load_derived_rules(config.derivedRules));
  SchemaConfig schema = config.schema.empty() ? SchemaConfig{} : load_schema(config.schema);
  auto run = run_pipeline(config, std::move(corpus), std::move(schema), options);
  run.provenance["corpusFileHash"] = sha256_hex(read_text_file(config.corpus));
  if (run.kb) run.kb->provenance["corpusFileHash"] = run.provenance["corpusFileHash"];
  return run;
}

nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : r.perFeature)
    features.push_back({{"name", f.name}, {"weight", f.weight}, {"appearance", f.appearance}, {"difference", f.difference}});
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"checked", c.checked}, {"violations", c.violations},
                      {"detail", c.detail}});
  return {{"cvMean", r.cvMean},
          {"cvStdErr", r.cvStdErr},
          {"trainingAccuracy", r.trainingAccuracy},
          {"holdoutAccuracy", r.holdoutAccuracy},
          {"holdoutPairs", r.holdoutPairs},
          {"selectionPairs", r.selectionPairs},
          {"selectedCount", r.selectedCount},
          {"perFeature", features},
          {"selfChecks", checks}};
}

std::vector<std::string> write_artifacts(const PipelineRun& run) {
  const auto& dir = run.config.outDir;
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, std::string>> files;
  if (run.catalog) {
    auto catalog = catalog_to_json(*run.catalog, false);
    std::map<std::string, std::size_t> levels;
    for (const auto& f : run.catalog->features()) ++levels[to_string(f.level)];
    catalog["levels"] = levels;
    catalog["boundaries"] = boundaries_to_json(run.extracted.boundaries);
    catalog["warnings"] = run.extracted.diagnostics.warnings;
    catalog["provenance"] = run.provenance;
    files.emplace_back("catalog.json", dump(catalog));
  }
  if (run.metrics) files.emplace_back("metrics.csv", metrics_csv(*run.catalog, *run.metrics));
  if (run.selection) {
    files.emplace_back("trace.csv", trace_csv(run.selection->trace));
    auto sel = selection_to_json(*run.selection, *run.catalog, run.config.selection);
    sel["provenance"] = run.provenance;
    files.emplace_back("selection.json", dump(sel));
  }
  if (run.kb) {
    files.emplace_back("kb.lp", emit_asp(*run.kb));
    files.emplace_back("kb.json", dump(knowledge_base_to_json(*run.kb)));
  }
  if (run.report) {
    auto report = report_to_json(*run.report);
    report["provenance"] = run.provenance;
    files.emplace_back("report.json", dump(report));
  }
  nlohmann::json manifest = {{"provenance", run.provenance}, {"artifacts", nlohmann::json::object()}};
  std::vector<std::string> written;
  for (const auto& [name, text] : files) {
    write_text_file(dir / name, text);
    manifest["artifacts"][name] = sha256_hex(text);
    written.push_back(name);
  }
  write_text_file(dir / "manifest.json", dump(manifest));
  written.push_back("manifest.json");
  return written;
}

}  // namespace kbsynth
