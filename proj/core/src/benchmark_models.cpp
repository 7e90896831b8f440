// SPDX-License-Identifier: Apache-2.0
#include "tlmor/benchmark_models.hpp"

namespace tlmor {

StateSpaceModel artificial_fom() {
  constexpr Index kOscillators = 3;
  constexpr Index kDiagonal = 1000;
  constexpr Index n = 2 * kOscillators + kDiagonal;
  Matrix A = Matrix::Zero(n, n);
  const double freq[kOscillators] = {100.0, 200.0, 400.0};
  for (Index k = 0; k < kOscillators; ++k) {
    const Index i = 2 * k;
    A(i, i) = A(i + 1, i + 1) = -1.0;
    A(i, i + 1) = freq[k];
    A(i + 1, i) = -freq[k];
  }
  for (Index k = 0; k < kDiagonal; ++k) A(2 * kOscillators + k, 2 * kOscillators + k) = -static_cast<double>(k + 1);
  Matrix B = Matrix::Ones(n, 1);
  B.topRows(2 * kOscillators).setConstant(10.0);
  Matrix C = B.transpose();
  return {std::move(A), std::move(B), std::move(C), Matrix::Zero(1, 1)};
}

}  // namespace tlmor
