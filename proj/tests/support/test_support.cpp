// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <cmath>

namespace tlmor::testing {

Matrix randn(Rng& rng, Index rows, Index cols) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = dist(rng);
  return M;
}

Matrix random_hurwitz(Rng& rng, Index n) {
  if (n == 0) return Matrix(0, 0);
  const Matrix M = randn(rng, n, n) / std::sqrt(static_cast<double>(n));
  std::uniform_real_distribution<double> margin(0.5, 1.5);
  Matrix A = M;
  A.diagonal().array() -= spectral_abscissa(M) + margin(rng);
  return A;
}

StateSpaceModel random_stable_model(Rng& rng, Index n, Index m, Index p) {
  return {random_hurwitz(rng, n), randn(rng, n, m), randn(rng, p, n), Matrix::Zero(p, m)};
}

StateSpaceModel random_minimum_phase(Rng& rng, Index n, Index m, const Matrix& d) {
  for (;;) {
    StateSpaceModel model(random_hurwitz(rng, n), randn(rng, n, m), randn(rng, m, n), d);
    const Matrix ai = model.A - model.B * d.inverse() * model.C;
    if (spectral_abscissa(ai) < -0.2) return model;
  }
}

StateSpaceModel random_nonminimum_phase(Rng& rng, Index n, Index m, const Matrix& d) {
  for (;;) {
    StateSpaceModel model(random_hurwitz(rng, n), randn(rng, n, m), randn(rng, m, n), d);
    const Matrix ai = model.A - model.B * d.inverse() * model.C;
    if (spectral_abscissa(ai) > 0.2) return model;
  }
}

Matrix quadrature_gramian(const Matrix& A, const Matrix& B, double t1, double t2, int panels) {
  if (panels % 2 != 0) ++panels;
  const double h = (t2 - t1) / panels;
  const Matrix step = matrix_exponential(A, h);
  Matrix state = matrix_exponential(A, t1) * B;
  Matrix sum = Matrix::Zero(A.rows(), A.rows());
  for (int k = 0; k <= panels; ++k) {
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    sum += w * state * state.transpose();
    state = step * state;
  }
  return sum * h / 3.0;
}

double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace tlmor::testing
