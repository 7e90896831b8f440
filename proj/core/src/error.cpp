// SPDX-License-Identifier: Apache-2.0
#include "tlmor/error.hpp"

namespace tlmor {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kSpectrumConflict: return "spectrum-conflict";
    case ErrorKind::kNonConvergence: return "non-convergence";
    case ErrorKind::kOverflow: return "overflow";
    case ErrorKind::kUnsupportedModel: return "unsupported-model";
    case ErrorKind::kInversion: return "inversion";
    case ErrorKind::kRank: return "rank";
    case ErrorKind::kBreakdown: return "breakdown";
    case ErrorKind::kNoStabilizingSolution: return "no-stabilizing-solution";
    case ErrorKind::kConstruction: return "construction";
    case ErrorKind::kConsistency: return "consistency";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace tlmor
