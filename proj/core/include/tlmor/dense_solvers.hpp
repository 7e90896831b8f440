// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace tlmor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

struct SolverTolerances {
  double residual_rel = 1e-10;
  double schur_rel = 1e-12;

  void validate() const;
};

// A = Q T Qᵀ with T quasi-upper-triangular (1x1 and 2x2 diagonal blocks).
struct RealSchurForm {
  Matrix Q;
  Matrix T;
  std::vector<Index> block_start;
  std::vector<Index> block_size;

  [[nodiscard]] Index size() const noexcept { return T.rows(); }
  [[nodiscard]] std::vector<std::complex<double>> eigenvalues() const;
};

RealSchurForm real_schur(const Matrix& A, const SolverTolerances& tol = {});

// A view of scale * T or scale * Tᵀ for a stored Schur factor, so that one
// factorization serves A, Aᵀ, -A and -Aᵀ.
class SchurOperand {
 public:
  explicit SchurOperand(const RealSchurForm& form) : form_(&form) {}

  [[nodiscard]] SchurOperand t() const noexcept {
    SchurOperand out = *this;
    out.transposed_ = !transposed_;
    return out;
  }
  [[nodiscard]] SchurOperand operator-() const noexcept {
    SchurOperand out = *this;
    out.scale_ = -scale_;
    return out;
  }

  [[nodiscard]] const RealSchurForm& form() const noexcept { return *form_; }
  [[nodiscard]] bool transposed() const noexcept { return transposed_; }
  [[nodiscard]] double scale() const noexcept { return scale_; }
  // The operand as an explicit dense matrix (tests and residual checks).
  [[nodiscard]] Matrix dense() const;

 private:
  const RealSchurForm* form_;
  bool transposed_ = false;
  double scale_ = 1.0;
};

inline SchurOperand op(const RealSchurForm& form) { return SchurOperand(form); }

// K J + J L + W = 0.
Matrix solve_sylvester(const Matrix& K, const Matrix& L, const Matrix& W,
                       const SolverTolerances& tol = {});
Matrix solve_sylvester(const SchurOperand& K, const SchurOperand& L, const Matrix& W);

// A X + X Aᵀ + W = 0, X symmetrized.
Matrix solve_lyapunov(const Matrix& A, const Matrix& W, const SolverTolerances& tol = {});
Matrix solve_lyapunov(const SchurOperand& A, const Matrix& W);

double sylvester_residual(const Matrix& K, const Matrix& L, const Matrix& W, const Matrix& J);
double lyapunov_residual(const Matrix& A, const Matrix& W, const Matrix& X);

// A X + X Aᵀ + X S X + G = 0 with A + X S Hurwitz.
Matrix solve_care(const Matrix& A, const Matrix& S, const Matrix& G);
double care_residual(const Matrix& A, const Matrix& S, const Matrix& G, const Matrix& X);

Matrix matrix_exponential(const Matrix& A, double t = 1.0);

// Fréchet derivative of the exponential at M in direction E.
Matrix expm_frechet(const Matrix& M, const Matrix& E);

bool is_hurwitz(const Matrix& A);
double spectral_abscissa(const Matrix& A);

}  // namespace tlmor
