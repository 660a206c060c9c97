// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <vector>

#include "kbsynth/candidates.hpp"
#include "kbsynth/parallel.hpp"

namespace kbsynth {

struct ImportanceModel {
  std::map<int, double> importance;  // feature id -> total gain, max-normalized

  double at(int featureId) const;
};

struct BoostingOptions {
  int rounds = 100;
  int maxDepth = 3;
  double learningRate = 0.1;
  double lambda = 1.0;
  Exec exec = Exec::Parallel;
};

/// Gradient-boosted trees on pair orientation (rows d and -d, labels +1/-1);
/// importance is the summed split gain per feature.
ImportanceModel fit_importance(const FeatureCatalog& catalog, const std::vector<int>& features,
                               const BoostingOptions& options = {});

}  // namespace kbsynth
