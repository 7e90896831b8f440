// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tlmor/lti_model.hpp"

namespace tlmor {

// Stable realization of Ĝ⁻*, where Ĝ* is the minimum-phase factor with
// Ĝ(s)Ĝ*(s) = Ĥ*(s)Ĥ(s).
struct SpectralFactorInverse {
  Matrix A_xi;
  Matrix B_xi;
  Matrix C_xi;
  Matrix D_xi;
  StateSpaceModel factor;     // Ĝ* itself
  // Construction runs in balanced coordinates z of the numerically minimal
  // part of Ĥ, with x ≈ basis·z (basis is r x q); the next two matrices refer
  // to those coordinates.
  Matrix basis;
  // r − q: states of Ĥ whose Hankel singular values are at roundoff level.
  Index discarded_states = 0;
  // H∞ bound on the change of Ĥ caused by the discarded states.
  double truncation_bound = 0.0;
  Matrix riccati_solution;    // stabilizing CARE solution
  Matrix observability;       // infinite-horizon observability gramian of Ĥ

  [[nodiscard]] StateSpaceModel as_model() const { return {A_xi, B_xi, C_xi, D_xi}; }
};

// Ĥ must be stable and square with invertible D.
SpectralFactorInverse build_spectral_factor_inverse(const StateSpaceModel& reduced);

}  // namespace tlmor
