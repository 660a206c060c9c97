// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "kbsynth/candidates.hpp"

namespace kbsynth {

struct TopicModel {
  int K = 0;
  std::uint64_t seed = 0;
  std::vector<int> vocabulary;                 // feature id per word
  std::vector<std::vector<double>> phi;        // K x |vocabulary|
  std::map<int, std::size_t> wordOf;           // feature id -> word index

  std::optional<std::size_t> word(int featureId) const;
};

struct TopicOptions {
  int iterations = 500;
  double alpha = -1.0;  // < 0 means 50/K
  double beta = 0.01;
};

/// Collapsed Gibbs LDA; documents are designs, words are the given features
/// with counts taken from their frequency vectors.
TopicModel fit_topics(const FeatureCatalog& catalog, const std::vector<int>& vocabulary, int K,
                      std::uint64_t seed, const TopicOptions& options = {});

}  // namespace kbsynth
