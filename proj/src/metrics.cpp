// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "kbsynth/error.hpp"
#include "kbsynth/io.hpp"

namespace kbsynth {

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Relevance: return "relevance";
    case Metric::Lda: return "lda";
    case Metric::Specificity: return "specificity";
    case Metric::Dominance: return "dominance";
    case Metric::Appearance: return "appearance";
    case Metric::Difference: return "difference";
    case Metric::Gap: return "gap";
    case Metric::Ratio: return "ratio";
  }
  return "unknown";
}

Metric metric_from_name(std::string_view name) {
  for (auto m : kAllMetrics)
    if (to_string(m) == name) return m;
  throw Error(ErrorKind::ConfigError, "unknown metric '" + std::string(name) + "'");
}

double score_relevance(const Feature& f) {
  if (f.is_unary()) return 1.0;
  std::vector<std::vector<ChainSegment>> paths;
  std::size_t longest = 0;
  for (const auto& c : f.components) {
    auto p = c.membership;
    p.insert(p.end(), c.parents.begin(), c.parents.end());
    longest = std::max(longest, p.size());
    paths.push_back(std::move(p));
  }
  if (longest == 0) return 1.0;
  std::size_t shared = 0;
  while (std::all_of(paths.begin(), paths.end(), [&](const auto& p) {
    return shared < p.size() && p[shared] == paths.front()[shared];
  }))
    ++shared;
  return static_cast<double>(shared) / static_cast<double>(longest);
}

int score_specificity(const Feature& f) {
  int total = 0;
  for (const auto& c : f.components) total += static_cast<int>(c.length());
  return total;
}

Distribution score_distribution(const FrequencyVector& v) {
  Distribution out;
  const std::size_t P = v.pairs();
  int posSupport = 0, negSupport = 0;
  for (std::size_t i = 0; i < P; ++i) {
    const bool p = v.pos[i] > 0, n = v.neg[i] > 0;
    out.appearance += p || n;
    out.difference += p != n;
    posSupport += p;
    negSupport += n;
  }
  if (P == 0) return out;
  const double relPos = static_cast<double>(posSupport) / static_cast<double>(P);
  const double relNeg = static_cast<double>(negSupport) / static_cast<double>(P);
  out.gap = std::abs(relPos - relNeg);
  if (posSupport == 0 && negSupport == 0)
    out.ratio = 1.0;
  else if (posSupport > 0 && negSupport > 0)
    out.ratio = std::max(relPos, relNeg) / std::min(relPos, relNeg);
  return out;
}

std::optional<int> component_word(const FeatureCatalog& catalog, const KeyValueChain& component) {
  return catalog.find({component.positive().ungrounded(0)});
}

double score_lda(const Feature& f, const FeatureCatalog& catalog, const TopicModel& model) {
  if (f.is_unary()) return 1.0;
  std::vector<std::size_t> words;
  for (const auto& c : f.components) {
    auto id = component_word(catalog, c);
    auto w = id ? model.word(*id) : std::nullopt;
    if (!w) return 0.0;
    words.push_back(*w);
  }
  double best = 0.0;
  for (const auto& row : model.phi) {
    double sum = 0.0;
    for (auto w : words) sum += row[w];
    best = std::max(best, sum / static_cast<double>(words.size()));
  }
  return best;
}

double score_dominance(const Feature& f, const FeatureCatalog& catalog, const ImportanceModel& model) {
  if (f.is_unary()) return 1.0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& c : f.components) {
    auto id = component_word(catalog, c);
    const double imp = id ? model.at(*id) : 0.0;
    lo = std::min(lo, imp);
    hi = std::max(hi, imp);
  }
  return hi > 0 ? lo / hi : 0.0;
}

std::vector<int> ungrounded_unaries(const FeatureCatalog& catalog) {
  std::vector<int> ids;
  for (const auto& f : catalog.features())
    if (f.is_unary() && !f.is_grounded()) ids.push_back(f.id);
  return ids;
}

MetricTable compute_metrics(const FeatureCatalog& catalog, const MetricOptions& options) {
  MetricTable table;
  const auto vocabulary = ungrounded_unaries(catalog);
  table.topics = fit_topics(catalog, vocabulary, options.numTopics, options.seed, options.topics);
  auto boosting = options.boosting;
  boosting.exec = options.exec;
  table.importance = fit_importance(catalog, vocabulary, boosting);

  const auto n = static_cast<std::ptrdiff_t>(catalog.size());
  table.rows.resize(catalog.size());
  std::vector<std::optional<double>> ratios(catalog.size());
#pragma omp parallel for schedule(dynamic) if (options.exec == Exec::Parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Feature& f = catalog[static_cast<int>(i)];
    auto& m = table.rows[static_cast<std::size_t>(i)];
    m.relevance = score_relevance(f);
    m.ldaScore = score_lda(f, catalog, table.topics);
    m.specificity = score_specificity(f);
    m.dominance = score_dominance(f, catalog, table.importance);
    auto dist = score_distribution(f.vector);
    m.appearanceCount = dist.appearance;
    m.differenceCount = dist.difference;
    m.determinanceGap = dist.gap;
    ratios[static_cast<std::size_t>(i)] = dist.ratio;
  }
  double maxRatio = 1.0;
  for (const auto& r : ratios)
    if (r) maxRatio = std::max(maxRatio, *r);
  for (std::size_t i = 0; i < ratios.size(); ++i) table.rows[i].determinanceRatio = ratios[i].value_or(maxRatio);
  return table;
}

namespace {

// Transformed so that larger is better before min-max scaling.
double metric_value(Metric m, const MetricVector& v, double P) {
  switch (m) {
    case Metric::Relevance: return v.relevance;
    case Metric::Lda: return v.ldaScore;
    case Metric::Specificity: return -static_cast<double>(v.specificity);
    case Metric::Dominance: return v.dominance;
    case Metric::Appearance: return v.appearanceCount / P;
    case Metric::Difference: return v.differenceCount / P;
    case Metric::Gap: return v.determinanceGap;
    case Metric::Ratio: return std::log(v.determinanceRatio);
  }
  return 0.0;
}

}  // namespace

std::vector<int> rank_candidates(const FeatureCatalog& catalog, MetricTable& table,
                                 const std::set<Metric>& ablate) {
  const std::size_t n = catalog.size();
  const double P = std::max<double>(1.0, static_cast<double>(catalog.pairs()));
  for (auto& row : table.rows) row.normalizedSum = 0.0;
  for (auto m : kAllMetrics) {
    if (ablate.count(m)) continue;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : table.rows) {
      const double x = metric_value(m, row, P);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    for (auto& row : table.rows)
      row.normalizedSum += hi > lo ? (metric_value(m, row, P) - lo) / (hi - lo) : 1.0;
  }

  std::vector<int> bySum(n);
  for (std::size_t i = 0; i < n; ++i) bySum[i] = static_cast<int>(i);
  std::stable_sort(bySum.begin(), bySum.end(), [&](int a, int b) {
    return table.rows[static_cast<std::size_t>(a)].normalizedSum > table.rows[static_cast<std::size_t>(b)].normalizedSum;
  });
  std::vector<std::size_t> position(n);
  for (std::size_t i = 0; i < n; ++i) position[static_cast<std::size_t>(bySum[i])] = i;

  std::vector<int> order;
  order.reserve(n);
  std::vector<char> placed(n, 0);
  std::function<void(int)> place = [&](int id) {
    if (placed[static_cast<std::size_t>(id)]) return;
    placed[static_cast<std::size_t>(id)] = 1;
    std::vector<int> deps(catalog[id].dependsOn.begin(), catalog[id].dependsOn.end());
    std::sort(deps.begin(), deps.end(),
              [&](int a, int b) { return position[static_cast<std::size_t>(a)] < position[static_cast<std::size_t>(b)]; });
    for (int d : deps) place(d);
    order.push_back(id);
  };
  for (int id : bySum) place(id);
  return order;
}

std::string metrics_csv(const FeatureCatalog& catalog, const MetricTable& table) {
  std::string out =
      "id,key,relevance,lda,specificity,dominance,appearance,difference,gap,ratio,normalized_sum\n";
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& m = table.rows[i];
    out += std::to_string(i) + "," + csv_field(catalog[static_cast<int>(i)].canonical()) + "," +
           format_double(m.relevance) + "," + format_double(m.ldaScore) + "," + std::to_string(m.specificity) +
           "," + format_double(m.dominance) + "," + std::to_string(m.appearanceCount) + "," +
           std::to_string(m.differenceCount) + "," + format_double(m.determinanceGap) + "," +
           format_double(m.determinanceRatio) + "," + format_double(m.normalizedSum) + "\n";
  }
  return out;
}

}  // namespace kbsynth
