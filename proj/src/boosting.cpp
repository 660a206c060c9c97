// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kbsynth/error.hpp"

namespace kbsynth {

namespace {

struct Split {
  double gain = 0.0;
  std::ptrdiff_t feature = -1;
  double threshold = 0.0;  // rows with value <= threshold go left
};

bool better(const Split& a, const Split& b) {
  if (a.gain != b.gain) return a.gain > b.gain;
  return a.feature >= 0 && (b.feature < 0 || a.feature < b.feature);
}

}  // namespace

double ImportanceModel::at(int featureId) const {
  auto it = importance.find(featureId);
  return it == importance.end() ? 0.0 : it->second;
}

ImportanceModel fit_importance(const FeatureCatalog& catalog, const std::vector<int>& features,
                               const BoostingOptions& options) {
  const std::size_t P = catalog.pairs();
  const std::size_t N = 2 * P;
  const auto F = static_cast<std::ptrdiff_t>(features.size());

  // Rows 0..P-1 are d, rows P..2P-1 are -d.
  std::vector<std::vector<int>> column(features.size(), std::vector<int>(N));
  bool any = false;
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& v = catalog[features[f]].vector;
    for (std::size_t i = 0; i < P; ++i) {
      const int d = v.pos[i] - v.neg[i];
      column[f][i] = d;
      column[f][P + i] = -d;
      any = any || d != 0;
    }
  }
  if (!any) throw Error(ErrorKind::DegenerateCorpus, "every difference vector is zero");

  std::vector<std::vector<std::uint32_t>> sorted(features.size());
  for (std::size_t f = 0; f < features.size(); ++f) {
    auto& s = sorted[f];
    s.resize(N);
    std::iota(s.begin(), s.end(), 0u);
    std::stable_sort(s.begin(), s.end(), [&](auto a, auto b) { return column[f][a] < column[f][b]; });
  }

  std::vector<double> label(N), score(N, 0.0), grad(N), hess(N);
  for (std::size_t i = 0; i < N; ++i) label[i] = i < P ? 1.0 : 0.0;
  std::vector<double> gain(features.size(), 0.0);
  const double lambda = options.lambda;

  for (int round = 0; round < options.rounds; ++round) {
    for (std::size_t i = 0; i < N; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-score[i]));
      grad[i] = p - label[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    std::vector<int> node(N, 0);  // heap index of the leaf holding each row
    std::vector<int> frontier{0};
    std::map<int, double> leafValue;
    for (int depth = 0; depth <= options.maxDepth; ++depth) {
      std::vector<int> next;
      for (int nd : frontier) {
        double G = 0, H = 0;
        for (std::size_t i = 0; i < N; ++i)
          if (node[i] == nd) G += grad[i], H += hess[i];
        const double parentScore = G * G / (H + lambda);
        Split best;
        if (depth < options.maxDepth) {
          std::vector<Split> perFeature(features.size());
#pragma omp parallel for schedule(dynamic) if (options.exec == Exec::Parallel)
          for (std::ptrdiff_t f = 0; f < F; ++f) {
            const auto& col = column[static_cast<std::size_t>(f)];
            double gl = 0, hl = 0;
            Split s;
            const std::uint32_t* prev = nullptr;
            for (const auto& r : sorted[static_cast<std::size_t>(f)]) {
              if (node[r] != nd) continue;
              if (prev && col[*prev] != col[r]) {
                const double g = 0.5 * (gl * gl / (hl + lambda) + (G - gl) * (G - gl) / (H - hl + lambda) -
                                        parentScore);
                if (g > s.gain) s = {g, f, 0.5 * (col[*prev] + col[r])};
              }
              gl += grad[r];
              hl += hess[r];
              prev = &r;
            }
            perFeature[static_cast<std::size_t>(f)] = s;
          }
          for (const auto& s : perFeature)
            if (better(s, best)) best = s;
        }
        if (best.feature >= 0 && best.gain > 1e-12) {
          gain[static_cast<std::size_t>(best.feature)] += best.gain;
          const auto& col = column[static_cast<std::size_t>(best.feature)];
          for (std::size_t i = 0; i < N; ++i)
            if (node[i] == nd) node[i] = col[i] <= best.threshold ? 2 * nd + 1 : 2 * nd + 2;
          next.push_back(2 * nd + 1);
          next.push_back(2 * nd + 2);
        } else {
          leafValue[nd] = -G / (H + lambda);
        }
      }
      frontier = std::move(next);
      if (frontier.empty()) break;
    }
    for (std::size_t i = 0; i < N; ++i) score[i] += options.learningRate * leafValue.at(node[i]);
  }

  ImportanceModel model;
  const double top = *std::max_element(gain.begin(), gain.end());
  for (std::size_t f = 0; f < features.size(); ++f) model.importance[features[f]] = top > 0 ? gain[f] / top : 0.0;
  return model;
}

}  // namespace kbsynth
