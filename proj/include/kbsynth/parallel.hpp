// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace kbsynth {

/// Kernels take this to pick the OpenMP path or the serial reference loop.
/// Both produce bit-identical results: parallel loops only split independent
/// outputs, never reductions.
enum class Exec { Serial, Parallel };

void set_thread_count(int threads);
int thread_count();

}  // namespace kbsynth
