// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kbsynth {

enum class ErrorKind {
  SyntaxError,
  DanglingReference,
  CycleError,
  MultipleRoots,
  NameCollision,
  LengthMismatch,
  CatalogOverflow,
  EmptyVocabulary,
  DegenerateCorpus,
  UnknownFeature,
  FoldTooSmall,
  UnrenderableChain,
  OrderMismatch,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every module failure surfaces as this exception; `kind()` is what the CLI
/// reports in its machine-readable error document.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Non-fatal findings (schema mismatches, out-of-range values, unknown statements).
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
};

}  // namespace kbsynth
