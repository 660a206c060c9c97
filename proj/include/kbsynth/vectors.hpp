// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kbsynth/chains.hpp"

namespace kbsynth {

using Count = std::int32_t;

/// Per-pair occurrence counts of a feature: `pos[i]` in pair i's preferred
/// design, `neg[i]` in the other one.
struct FrequencyVector {
  std::vector<Count> pos;
  std::vector<Count> neg;

  static FrequencyVector zeros(std::size_t pairs);
  static FrequencyVector ones(std::size_t pairs);

  std::size_t pairs() const { return pos.size(); }
  bool is_zero() const;
  Count at_design(std::size_t design) const { return design % 2 == 0 ? pos[design / 2] : neg[design / 2]; }

  friend bool operator==(const FrequencyVector&, const FrequencyVector&) = default;
};

struct DifferenceVector {
  std::vector<int> d;
};

/// Bags are indexed by design: 2i positive, 2i+1 negative.
FrequencyVector count_frequency(const KeyValueChain& chain, std::span<const ChainBag> bags);

/// Element-wise max where every input is non-zero, else 0. Needs at least two inputs.
FrequencyVector combine_vectors(std::span<const FrequencyVector> vs);

/// Zero where `v` fires; elsewhere the parent's count, or 1 without a parent.
FrequencyVector negate_vector(const FrequencyVector& v, const std::optional<FrequencyVector>& parent);

/// Element-wise (saturating) sum of grounded variants.
FrequencyVector unground_merge(std::span<const FrequencyVector> vs);

DifferenceVector difference(const FrequencyVector& v);

}  // namespace kbsynth
