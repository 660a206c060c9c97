// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "kbsynth/vectors.hpp"

using namespace kbsynth;

namespace {

FrequencyVector fv(std::vector<Count> pos, std::vector<Count> neg) { return {std::move(pos), std::move(neg)}; }

KeyValueChain chain(std::vector<ChainSegment> m, std::vector<ChainSegment> p, ChainSegment t) {
  KeyValueChain c;
  c.membership = std::move(m);
  c.parents = std::move(p);
  c.terminal = std::move(t);
  return c;
}

}  // namespace

TEST_CASE("counts per design follow the 2i/2i+1 layout") {
  auto a = chain({{"view", "0"}}, {}, {"mark", ""});
  auto b = chain({{"view", "0"}}, {}, {"scale", ""});
  std::vector<ChainBag> bags{{{a, 2}}, {{a, 1}, {b, 1}}, {}, {{b, 3}}};
  auto va = count_frequency(a, bags);
  CHECK(va == fv({2, 0}, {1, 0}));
  auto vb = count_frequency(b, bags);
  CHECK(vb == fv({0, 0}, {1, 3}));
  CHECK(va.at_design(1) == 1);
  CHECK(vb.at_design(3) == 3);
}

TEST_CASE("un-grounded patterns sum matching occurrences") {
  auto x = chain({{"view", "0"}, {"mark", "0"}}, {{"channel", "x"}}, {"field", "a"});
  auto y = chain({{"view", "0"}, {"mark", "1"}}, {{"channel", "x"}}, {"field", "a"});
  std::vector<ChainBag> bags{{{x, 1}, {y, 2}}, {}};
  CHECK(count_frequency(x.ungrounded(0), bags) == fv({3}, {0}));
  CHECK(count_frequency(x, bags) == fv({1}, {0}));
}

TEST_CASE("combination takes the max only where every input fires") {
  std::vector<FrequencyVector> vs{fv({1, 2, 0}, {3, 0, 1}), fv({4, 1, 5}, {1, 1, 1})};
  CHECK(combine_vectors(vs) == fv({4, 2, 0}, {3, 0, 1}));
  std::vector<FrequencyVector> three{fv({1}, {1}), fv({2}, {1}), fv({3}, {0})};
  CHECK(combine_vectors(three) == fv({3}, {0}));
}

TEST_CASE("negation is conditioned on the parent") {
  auto v = fv({1, 0, 0}, {0, 2, 0});
  CHECK(negate_vector(v, std::nullopt) == fv({0, 1, 1}, {1, 0, 1}));
  auto parent = fv({2, 3, 0}, {1, 2, 4});
  CHECK(negate_vector(v, parent) == fv({0, 3, 0}, {1, 0, 4}));
}

TEST_CASE("un-ground merge is an element-wise sum") {
  std::vector<FrequencyVector> vs{fv({1, 0}, {2, 0}), fv({1, 3}, {0, 0})};
  CHECK(unground_merge(vs) == fv({2, 3}, {2, 0}));
}

TEST_CASE("difference vector") {
  auto d = difference(fv({3, 0, 1}, {1, 2, 1}));
  CHECK(d.d == std::vector<int>{2, -2, 0});
  CHECK(FrequencyVector::zeros(2).is_zero());
  CHECK_FALSE(FrequencyVector::ones(1).is_zero());
}
