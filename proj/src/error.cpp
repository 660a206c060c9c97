// SPDX-License-Identifier: Apache-2.0

#include "kbsynth/error.hpp"

namespace kbsynth {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::DanglingReference: return "DanglingReference";
    case ErrorKind::CycleError: return "CycleError";
    case ErrorKind::MultipleRoots: return "MultipleRoots";
    case ErrorKind::NameCollision: return "NameCollision";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::CatalogOverflow: return "CatalogOverflow";
    case ErrorKind::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorKind::DegenerateCorpus: return "DegenerateCorpus";
    case ErrorKind::UnknownFeature: return "UnknownFeature";
    case ErrorKind::FoldTooSmall: return "FoldTooSmall";
    case ErrorKind::UnrenderableChain: return "UnrenderableChain";
    case ErrorKind::OrderMismatch: return "OrderMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace kbsynth
