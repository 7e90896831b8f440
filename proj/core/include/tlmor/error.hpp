// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tlmor {

enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kSpectrumConflict,
  kNonConvergence,
  kOverflow,
  kUnsupportedModel,
  kInversion,
  kRank,
  kBreakdown,
  kNoStabilizingSolution,
  kConstruction,
  kConsistency,
  kParse,
  kIo,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tlmor
