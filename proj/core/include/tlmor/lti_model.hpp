// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <string>
#include <vector>

#include "tlmor/dense_solvers.hpp"

namespace tlmor {

// Continuous-time realization x' = Ax + Bu, y = Cx + Du. n = 0 is a pure gain.
struct StateSpaceModel {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;

  StateSpaceModel() = default;
  // Checks dimension consistency and finiteness; throws on violation.
  StateSpaceModel(Matrix a, Matrix b, Matrix c, Matrix d);

  [[nodiscard]] Index states() const noexcept { return A.rows(); }
  [[nodiscard]] Index inputs() const noexcept { return D.cols(); }
  [[nodiscard]] Index outputs() const noexcept { return D.rows(); }
  [[nodiscard]] bool is_square() const noexcept { return D.rows() == D.cols(); }

  // Same model with a different feedthrough.
  [[nodiscard]] StateSpaceModel with_feedthrough(const Matrix& d) const;
};

// Realization of H⁻¹ for a square H with invertible D.
using InverseRealization = StateSpaceModel;

struct TimeInterval {
  double t1 = 0.0;
  double t2 = 0.0;

  void validate() const;
  [[nodiscard]] double length() const noexcept { return t2 - t1; }
};

enum class DiagnosticCode {
  kDimensionMismatch,
  kNonFinite,
  kNotHurwitz,
  kRankDeficientD,
};

struct Diagnostic {
  DiagnosticCode code;
  std::string message;
};

std::vector<Diagnostic> validate(const StateSpaceModel& model);

// Singular values of D below this fraction of the largest count as zero.
inline constexpr double kFeedthroughRankTol = 1e-12;

Index numerical_rank(const Matrix& M, double rel_tol = kFeedthroughRankTol);
bool has_full_rank_feedthrough(const StateSpaceModel& model);

InverseRealization inverse_realization(const StateSpaceModel& model);

// Returns eps·I when D is rank-deficient, otherwise D.
Matrix epsilon_regularize(const Matrix& D, double eps);

// Samples of h(t) = C e^{At} B; the D·δ(t) term is excluded.
std::vector<Matrix> impulse_response(const StateSpaceModel& model, const std::vector<double>& grid);

ComplexMatrix transfer_function(const StateSpaceModel& model, std::complex<double> s);

// Parallel difference H - Ĥ: blkdiag(A, Â), [B; B̂], [C, -Ĉ], D - D̂.
StateSpaceModel additive_error_system(const StateSpaceModel& full, const StateSpaceModel& reduced);

// Invariant zeros of a square model with invertible D all in the open left half-plane.
bool is_minimum_phase(const StateSpaceModel& model);

}  // namespace tlmor
