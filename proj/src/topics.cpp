// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/topics.hpp"

#include "kbsynth/error.hpp"
#include "kbsynth/random.hpp"

namespace kbsynth {

std::optional<std::size_t> TopicModel::word(int featureId) const {
  auto it = wordOf.find(featureId);
  if (it == wordOf.end()) return std::nullopt;
  return it->second;
}

TopicModel fit_topics(const FeatureCatalog& catalog, const std::vector<int>& vocabulary, int K,
                      std::uint64_t seed, const TopicOptions& options) {
  if (K < 2) throw Error(ErrorKind::ConfigError, "topic count must be at least 2");
  if (vocabulary.empty()) throw Error(ErrorKind::EmptyVocabulary, "no un-grounded unary features to model");

  const std::size_t V = vocabulary.size();
  const std::size_t D = catalog.pairs() * 2;
  const double alpha = options.alpha < 0 ? 50.0 / K : options.alpha;
  const double beta = options.beta;

  std::vector<std::uint32_t> tokenWord;
  std::vector<std::uint32_t> tokenDoc;
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t w = 0; w < V; ++w) {
      const auto c = catalog[vocabulary[w]].vector.at_design(d);
      for (Count i = 0; i < c; ++i) {
        tokenWord.push_back(static_cast<std::uint32_t>(w));
        tokenDoc.push_back(static_cast<std::uint32_t>(d));
      }
    }

  const auto k = static_cast<std::size_t>(K);
  std::vector<std::uint32_t> z(tokenWord.size());
  std::vector<std::int64_t> nDocTopic(D * k, 0), nWordTopic(V * k, 0), nTopic(k, 0);
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < z.size(); ++t) {
    z[t] = static_cast<std::uint32_t>(uniform_below(rng, k));
    ++nDocTopic[tokenDoc[t] * k + z[t]];
    ++nWordTopic[tokenWord[t] * k + z[t]];
    ++nTopic[z[t]];
  }

  std::vector<double> p(k);
  const double vBeta = static_cast<double>(V) * beta;
  for (int it = 0; it < options.iterations; ++it) {
    for (std::size_t t = 0; t < z.size(); ++t) {
      const std::size_t d = tokenDoc[t], w = tokenWord[t];
      std::size_t old = z[t];
      --nDocTopic[d * k + old];
      --nWordTopic[w * k + old];
      --nTopic[old];
      double total = 0;
      for (std::size_t j = 0; j < k; ++j) {
        total += (static_cast<double>(nDocTopic[d * k + j]) + alpha) *
                 (static_cast<double>(nWordTopic[w * k + j]) + beta) / (static_cast<double>(nTopic[j]) + vBeta);
        p[j] = total;
      }
      const double u = unit_uniform(rng) * total;
      std::size_t nz = 0;
      while (nz + 1 < k && p[nz] <= u) ++nz;
      z[t] = static_cast<std::uint32_t>(nz);
      ++nDocTopic[d * k + nz];
      ++nWordTopic[w * k + nz];
      ++nTopic[nz];
    }
  }

  TopicModel model;
  model.K = K;
  model.seed = seed;
  model.vocabulary = vocabulary;
  for (std::size_t w = 0; w < V; ++w) model.wordOf[vocabulary[w]] = w;
  model.phi.assign(k, std::vector<double>(V));
  for (std::size_t j = 0; j < k; ++j) {
    double sum = 0;
    for (std::size_t w = 0; w < V; ++w) {
      model.phi[j][w] = static_cast<double>(nWordTopic[w * k + j]) + beta;
      sum += model.phi[j][w];
    }
    for (auto& x : model.phi[j]) x /= sum;
  }
  return model;
}

}  // namespace kbsynth
