// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tlmor/lti_model.hpp"

namespace tlmor {

// The n = 1006 SISO "artificial dynamical system" of the SLICOT benchmark
// collection: three lightly damped oscillators (frequencies 100, 200, 400)
// and the diagonal −1, …, −1000, with B = Cᵀ = [10·1₆; 1₁₀₀₀] and D = 0.
StateSpaceModel artificial_fom();

}  // namespace tlmor
