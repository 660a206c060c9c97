// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <iostream>

#include "kbsynth/error.hpp"
#include "kbsynth/io.hpp"
#include "kbsynth/parallel.hpp"
#include "kbsynth/pipeline.hpp"

using namespace kbsynth;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> ablate;
  std::string initialFeatures;
  int jobs = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "pipeline config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--ablate", c.ablate, "metric excluded from the normalized sum (repeatable)");
  cmd->add_option("--initial-features", c.initialFeatures, "JSON list of features to start selection from")
      ->check(CLI::ExistingFile);
  cmd->add_option("--jobs", c.jobs, "worker threads (0 = OpenMP default)");
}

PipelineConfig load(const Common& c) {
  PipelineConfig config = load_pipeline_config(c.config);
  if (c.seed) {
    config.seed = *c.seed;
    config.selection.seed = *c.seed;
  }
  for (const auto& m : c.ablate) config.selection.ablatedMetrics.insert(metric_from_name(m));
  return config;
}

RunOptions options(const Common& c, Stage until) {
  RunOptions o;
  o.until = until;
  if (!c.initialFeatures.empty()) {
    try {
      o.initialFeatures = nlohmann::json::parse(read_text_file(c.initialFeatures));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError, c.initialFeatures + ": " + e.what());
    }
  }
  return o;
}

void print_summary(const std::string& command, const PipelineRun& run, const std::vector<std::string>& written) {
  nlohmann::json out = {{"command", command}, {"outDir", run.config.outDir.string()}, {"artifacts", written}};
  if (run.catalog) out["catalogSize"] = run.catalog->size();
  if (run.selection) out["selected"] = run.selection->state.selected.size();
  if (run.report) {
    out["cvMean"] = run.report->cvMean;
    out["holdoutAccuracy"] = run.report->holdoutAccuracy;
    bool ok = true;
    for (const auto& c : run.report->checks) ok = ok && c.passed;
    out["selfChecksPassed"] = ok;
  }
  std::cout << out.dump(2) << "\n";
}

int fail(const std::string& kind, const std::string& message) {
  nlohmann::json err = {{"error", kind}, {"message", message}};
  std::cerr << err.dump() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesize a weighted design knowledge base from ranked design pairs"};
  app.require_subcommand(1);

  Common common;
  std::map<std::string, Stage> stages{{"run", Stage::Evaluate},
                                      {"extract", Stage::Extract},
                                      {"select", Stage::Select},
                                      {"render", Stage::Render}};
  std::map<std::string, CLI::App*> stageCmds;
  stageCmds["run"] = app.add_subcommand("run", "all stages, all artifacts");
  stageCmds["extract"] = app.add_subcommand("extract", "chains, catalog and metrics");
  stageCmds["select"] = app.add_subcommand("select", "extraction plus feature selection");
  stageCmds["render"] = app.add_subcommand("render", "selection plus knowledge base emission");
  for (auto& [name, cmd] : stageCmds) add_common(cmd, common);

  auto* ablate = app.add_subcommand("ablate-suite", "no-ablation run plus one run per ablated metric");
  add_common(ablate, common);

  std::string kbPath, corpusPath, outPath;
  int evalJobs = 0;
  auto* evaluate = app.add_subcommand("evaluate", "pairwise accuracy of a knowledge base on a corpus");
  evaluate->add_option("--kb", kbPath, "kb.lp")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--corpus", corpusPath, "JSON-lines corpus")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", outPath, "write the report here instead of stdout");
  evaluate->add_option("--jobs", evalJobs, "worker threads (0 = OpenMP default)");

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto& [name, cmd] : stageCmds) {
      if (!cmd->parsed()) continue;
      if (common.jobs > 0) set_thread_count(common.jobs);
      const auto config = load(common);
      const auto run = run_pipeline(config, options(common, stages.at(name)));
      const auto written = write_artifacts(run);
      print_summary(name, run, written);
      if (run.report)
        for (const auto& c : run.report->checks)
          if (!c.passed) return fail("SelfCheckFailed", c.name + ": " + c.detail);
      return 0;
    }

    if (ablate->parsed()) {
      if (common.jobs > 0) set_thread_count(common.jobs);
      const auto config = load(common);
      auto run = run_pipeline(config, options(common, Stage::Extract));
      const auto ctx = selection_context(run, Exec::Parallel);
      std::optional<std::vector<int>> seeded;
      if (auto o = options(common, Stage::Extract); o.initialFeatures)
        seeded = resolve_initial_features(*o.initialFeatures, *run.catalog);
      const RenderContext rc{run.schema, run.extracted.registry, run.extracted.boundaries};
      const auto holdout = [&](const SelectionResult& r) {
        auto kb = render_knowledge_base(r.state.selected, *run.catalog, rc);
        assign_weights(kb, r.model);
        return pairwise_accuracy(kb, run.holdoutCorpus);
      };
      const auto results = run_ablations(*run.catalog, *run.metrics, config.selection, ctx, holdout, seeded);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& r : results)
        out.push_back({{"ablation", r.name},
                       {"cvMean", r.selection.state.bestCv.mean},
                       {"cvStdErr", r.selection.state.bestCv.stdError},
                       {"holdoutAccuracy", r.holdoutAccuracy},
                       {"selected", r.selection.state.selected.size()},
                       {"forwardHalt", r.selection.trace.forwardHalt},
                       {"backwardHalt", r.selection.trace.backwardHalt}});
      const nlohmann::json doc = {{"runs", out}, {"provenance", run.provenance}};
      write_text_file(config.outDir / "ablations.json", doc.dump(2) + "\n");
      std::cout << doc.dump(2) << "\n";
      return 0;
    }

    if (evaluate->parsed()) {
      if (evalJobs > 0) set_thread_count(evalJobs);
      const auto kb = parse_asp(read_text_file(kbPath));
      const auto corpus = load_corpus(corpusPath);
      Diagnostics diag;
      const double acc = pairwise_accuracy(kb, corpus, &diag);
      nlohmann::json report = {{"pairs", corpus.size()},
                               {"rules", kb.rules.size()},
                               {"accuracy", acc},
                               {"kbProvenance", kb.provenance},
                               {"corpusFileHash", sha256_hex(read_text_file(corpusPath))},
                               {"warnings", diag.warnings}};
      if (outPath.empty())
        std::cout << report.dump(2) << "\n";
      else
        write_text_file(outPath, report.dump(2) + "\n");
      return 0;
    }
  } catch (const Error& e) {
    return fail(std::string(to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return fail("InternalError", e.what());
  }
  return 0;
}
