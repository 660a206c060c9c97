// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/vectors.hpp"

#include <algorithm>
#include <limits>

#include "kbsynth/error.hpp"

namespace kbsynth {

namespace {

void check_lengths(std::span<const FrequencyVector> vs) {
  for (const auto& v : vs)
    if (v.pos.size() != vs.front().pos.size() || v.neg.size() != v.pos.size())
      throw Error(ErrorKind::LengthMismatch, "frequency vectors differ in length");
}

Count saturating_add(Count a, Count b) {
  std::int64_t s = static_cast<std::int64_t>(a) + b;
  return static_cast<Count>(std::min<std::int64_t>(s, std::numeric_limits<Count>::max()));
}

}  // namespace

FrequencyVector FrequencyVector::zeros(std::size_t pairs) {
  return {std::vector<Count>(pairs, 0), std::vector<Count>(pairs, 0)};
}

FrequencyVector FrequencyVector::ones(std::size_t pairs) {
  return {std::vector<Count>(pairs, 1), std::vector<Count>(pairs, 1)};
}

bool FrequencyVector::is_zero() const {
  auto zero = [](Count c) { return c == 0; };
  return std::all_of(pos.begin(), pos.end(), zero) && std::all_of(neg.begin(), neg.end(), zero);
}

FrequencyVector count_frequency(const KeyValueChain& chain, std::span<const ChainBag> bags) {
  auto v = FrequencyVector::zeros(bags.size() / 2);
  const KeyValueChain key = chain.positive();
  for (std::size_t d = 0; d < bags.size(); ++d) {
    Count n = 0;
    if (key.grounded) {
      auto it = bags[d].find(key);
      if (it != bags[d].end()) n = it->second;
    } else {
      for (const auto& [occ, count] : bags[d])
        if (key.matches(occ)) n = saturating_add(n, count);
    }
    (d % 2 == 0 ? v.pos : v.neg)[d / 2] = n;
  }
  return v;
}

FrequencyVector combine_vectors(std::span<const FrequencyVector> vs) {
  if (vs.size() < 2) throw Error(ErrorKind::LengthMismatch, "combination needs at least two vectors");
  check_lengths(vs);
  FrequencyVector out = vs.front();
  auto fold = [&](std::vector<Count> FrequencyVector::*half) {
    auto& dst = out.*half;
    for (std::size_t e = 0; e < dst.size(); ++e) {
      Count m = 0;
      bool all = true;
      for (const auto& v : vs) {
        Count x = (v.*half)[e];
        if (x == 0) {
          all = false;
          break;
        }
        m = std::max(m, x);
      }
      dst[e] = all ? m : 0;
    }
  };
  fold(&FrequencyVector::pos);
  fold(&FrequencyVector::neg);
  return out;
}

FrequencyVector negate_vector(const FrequencyVector& v, const std::optional<FrequencyVector>& parent) {
  if (parent) {
    const FrequencyVector both[] = {v, *parent};
    check_lengths(both);
  }
  FrequencyVector out = v;
  for (std::size_t e = 0; e < v.pos.size(); ++e) {
    out.pos[e] = v.pos[e] > 0 ? 0 : (parent ? parent->pos[e] : 1);
    out.neg[e] = v.neg[e] > 0 ? 0 : (parent ? parent->neg[e] : 1);
  }
  return out;
}

FrequencyVector unground_merge(std::span<const FrequencyVector> vs) {
  if (vs.empty()) throw Error(ErrorKind::LengthMismatch, "nothing to merge");
  check_lengths(vs);
  FrequencyVector out = vs.front();
  for (std::size_t i = 1; i < vs.size(); ++i) {
    for (std::size_t e = 0; e < out.pos.size(); ++e) {
      out.pos[e] = saturating_add(out.pos[e], vs[i].pos[e]);
      out.neg[e] = saturating_add(out.neg[e], vs[i].neg[e]);
    }
  }
  return out;
}

DifferenceVector difference(const FrequencyVector& v) {
  DifferenceVector d;
  d.d.resize(v.pos.size());
  for (std::size_t i = 0; i < v.pos.size(); ++i) d.d[i] = v.pos[i] - v.neg[i];
  return d;
}

}  // namespace kbsynth
