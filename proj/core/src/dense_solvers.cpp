// SPDX-License-Identifier: Apache-2.0
#include "tlmor/dense_solvers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "tlmor/error.hpp"

namespace tlmor {

namespace {

void require_square(const Matrix& M, const char* what) {
  if (M.rows() != M.cols()) {
    std::ostringstream os;
    os << what << " must be square, got " << M.rows() << "x" << M.cols();
    throw Error(ErrorKind::kDimensionMismatch, os.str());
  }
}

void require_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw Error(ErrorKind::kInvalidArgument, std::string(what) + " has non-finite entries");
}

void partition_blocks(RealSchurForm& form) {
  const Index n = form.T.rows();
  form.block_start.clear();
  form.block_size.clear();
  for (Index i = 0; i < n;) {
    const bool pair = i + 1 < n && form.T(i + 1, i) != 0.0;
    form.block_start.push_back(i);
    form.block_size.push_back(pair ? 2 : 1);
    i += pair ? 2 : 1;
  }
}

// Solves a X + X b = c for blocks of size at most 2x2 via the Kronecker form.
Matrix solve_small_sylvester(const Matrix& a, const Matrix& b, const Matrix& c) {
  const Index p = a.rows();
  const Index q = b.rows();
  if (p == 1 && q == 1) {
    return Matrix::Constant(1, 1, c(0, 0) / (a(0, 0) + b(0, 0)));
  }
  Matrix kron = Matrix::Zero(p * q, p * q);
  for (Index j = 0; j < q; ++j) {
    kron.block(j * p, j * p, p, p) += a;
    for (Index l = 0; l < q; ++l) kron.block(l * p, j * p, p, p).diagonal().array() += b(j, l);
  }
  const Eigen::Map<const Vector> rhs(c.data(), p * q);
  const Vector sol = kron.fullPivLu().solve(rhs);
  return Eigen::Map<const Matrix>(sol.data(), p, q);
}

void check_spectrum(const SchurOperand& K, const SchurOperand& L) {
  const auto lk = K.form().eigenvalues();
  const auto ll = L.form().eigenvalues();
  double scale = 1.0;
  for (const auto& z : lk) scale = std::max(scale, std::abs(z));
  for (const auto& z : ll) scale = std::max(scale, std::abs(z));
  const double threshold = 1e-12 * scale;
  for (const auto& a : lk) {
    for (const auto& b : ll) {
      const std::complex<double> sum = K.scale() * a + L.scale() * b;
      if (std::abs(sum) <= threshold) {
        std::ostringstream os;
        os << "eigenvalues " << K.scale() * a << " and " << L.scale() * b
           << " sum to (nearly) zero; Sylvester operator is singular";
        throw Error(ErrorKind::kSpectrumConflict, os.str());
      }
    }
  }
}

// Back-substitution for op(T) X + X op(S) = C with quasi-triangular T, S.
Matrix solve_quasi_triangular(const SchurOperand& K, const SchurOperand& L, Matrix C) {
  const Matrix& T = K.form().T;
  const Matrix& S = L.form().T;
  const double sT = K.scale();
  const double sS = L.scale();
  const bool tT = K.transposed();
  const bool tS = L.transposed();
  const Index n = T.rows();
  const Index r = S.rows();
  const auto& rs = K.form().block_start;
  const auto& rz = K.form().block_size;
  const auto& cs = L.form().block_start;
  const auto& cz = L.form().block_size;
  const auto nrb = static_cast<Index>(rs.size());
  const auto ncb = static_cast<Index>(cs.size());

  Matrix X = Matrix::Zero(n, r);
  for (Index jb = 0; jb < ncb; ++jb) {
    const Index jj = tS ? ncb - 1 - jb : jb;
    const Index cj = cs[static_cast<std::size_t>(jj)];
    const Index q = cz[static_cast<std::size_t>(jj)];
    Matrix Cj = C.middleCols(cj, q);
    if (!tS) {
      if (cj > 0) Cj.noalias() -= sS * (X.leftCols(cj) * S.block(0, cj, cj, q));
    } else {
      const Index rest = r - cj - q;
      if (rest > 0) Cj.noalias() -= sS * (X.rightCols(rest) * S.block(cj, cj + q, q, rest).transpose());
    }
    const Matrix Sjj = tS ? Matrix(sS * S.block(cj, cj, q, q).transpose()) : Matrix(sS * S.block(cj, cj, q, q));

    for (Index ib = 0; ib < nrb; ++ib) {
      const Index ii = tT ? ib : nrb - 1 - ib;
      const Index ri = rs[static_cast<std::size_t>(ii)];
      const Index p = rz[static_cast<std::size_t>(ii)];
      Matrix rhs = Cj.middleRows(ri, p);
      if (!tT) {
        const Index rest = n - ri - p;
        if (rest > 0) rhs.noalias() -= sT * (T.block(ri, ri + p, p, rest) * X.block(ri + p, cj, rest, q));
      } else if (ri > 0) {
        rhs.noalias() -= sT * (T.block(0, ri, ri, p).transpose() * X.block(0, cj, ri, q));
      }
      const Matrix Tii = tT ? Matrix(sT * T.block(ri, ri, p, p).transpose()) : Matrix(sT * T.block(ri, ri, p, p));
      X.block(ri, cj, p, q) = solve_small_sylvester(Tii, Sjj, rhs);
    }
  }
  return X;
}

double fro(const Matrix& M) { return M.norm(); }

}  // namespace

void SolverTolerances::validate() const {
  if (!(residual_rel > 0.0) || !(schur_rel > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "solver tolerances must be strictly positive");
  }
}

std::vector<std::complex<double>> RealSchurForm::eigenvalues() const {
  std::vector<std::complex<double>> out;
  out.reserve(static_cast<std::size_t>(T.rows()));
  for (std::size_t k = 0; k < block_start.size(); ++k) {
    const Index i = block_start[k];
    if (block_size[k] == 1) {
      out.emplace_back(T(i, i), 0.0);
      continue;
    }
    const double a = T(i, i), b = T(i, i + 1), c = T(i + 1, i), d = T(i + 1, i + 1);
    const double mean = 0.5 * (a + d);
    const double disc = 0.25 * (a - d) * (a - d) + b * c;
    if (disc >= 0.0) {
      out.emplace_back(mean + std::sqrt(disc), 0.0);
      out.emplace_back(mean - std::sqrt(disc), 0.0);
    } else {
      out.emplace_back(mean, std::sqrt(-disc));
      out.emplace_back(mean, -std::sqrt(-disc));
    }
  }
  return out;
}

RealSchurForm real_schur(const Matrix& A, const SolverTolerances& tol) {
  tol.validate();
  require_square(A, "real_schur input");
  require_finite(A, "real_schur input");
  RealSchurForm form;
  if (A.rows() == 0) {
    form.Q = Matrix(0, 0);
    form.T = Matrix(0, 0);
    return form;
  }
  Eigen::RealSchur<Matrix> schur(A.rows());
  schur.compute(A, true);
  if (schur.info() != Eigen::Success) {
    std::ostringstream os;
    os << "real Schur iteration did not converge within " << schur.getMaxIterations() << " iterations";
    throw Error(ErrorKind::kNonConvergence, os.str());
  }
  form.Q = schur.matrixU();
  form.T = schur.matrixT();
  // Eigen leaves roundoff below the quasi-triangular structure untouched; clear it.
  for (Index j = 0; j < form.T.cols(); ++j) {
    for (Index i = j + 2; i < form.T.rows(); ++i) form.T(i, j) = 0.0;
  }
  partition_blocks(form);
  return form;
}

Matrix SchurOperand::dense() const {
  const Matrix& Q = form_->Q;
  const Matrix T = transposed_ ? Matrix(form_->T.transpose()) : form_->T;
  return scale_ * (Q * T * Q.transpose());
}

Matrix solve_sylvester(const SchurOperand& K, const SchurOperand& L, const Matrix& W) {
  const Index n = K.form().size();
  const Index r = L.form().size();
  if (W.rows() != n || W.cols() != r) {
    std::ostringstream os;
    os << "Sylvester right-hand side is " << W.rows() << "x" << W.cols() << ", expected " << n << "x" << r;
    throw Error(ErrorKind::kDimensionMismatch, os.str());
  }
  if (n == 0 || r == 0) return Matrix::Zero(n, r);
  check_spectrum(K, L);
  const Matrix& U = K.form().Q;
  const Matrix& V = L.form().Q;
  Matrix rhs = -(U.transpose() * W * V);
  const Matrix Y = solve_quasi_triangular(K, L, std::move(rhs));
  return U * Y * V.transpose();
}

Matrix solve_sylvester(const Matrix& K, const Matrix& L, const Matrix& W, const SolverTolerances& tol) {
  require_square(K, "Sylvester K");
  require_square(L, "Sylvester L");
  const RealSchurForm sk = real_schur(K, tol);
  const RealSchurForm sl = real_schur(L, tol);
  Matrix J = solve_sylvester(op(sk), op(sl), W);
  // One step of iterative refinement when the direct solve is not accurate enough.
  if (sylvester_residual(K, L, W, J) > tol.residual_rel) {
    const Matrix R = K * J + J * L + W;
    J += solve_sylvester(op(sk), op(sl), R);
  }
  return J;
}

Matrix solve_lyapunov(const SchurOperand& A, const Matrix& W) {
  Matrix X = solve_sylvester(A, A.t(), W);
  return 0.5 * (X + X.transpose());
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& W, const SolverTolerances& tol) {
  require_square(A, "Lyapunov A");
  const RealSchurForm sa = real_schur(A, tol);
  Matrix X = solve_lyapunov(op(sa), W);
  if (lyapunov_residual(A, W, X) > tol.residual_rel) {
    const Matrix R = A * X + X * A.transpose() + W;
    X += solve_lyapunov(op(sa), 0.5 * (R + R.transpose()));
  }
  return X;
}

double sylvester_residual(const Matrix& K, const Matrix& L, const Matrix& W, const Matrix& J) {
  const double denom = fro(K) * fro(J) + fro(J) * fro(L) + fro(W);
  if (denom == 0.0) return 0.0;
  return fro(K * J + J * L + W) / denom;
}

double lyapunov_residual(const Matrix& A, const Matrix& W, const Matrix& X) {
  const double denom = 2.0 * fro(A) * fro(X) + fro(W);
  if (denom == 0.0) return 0.0;
  return fro(A * X + X * A.transpose() + W) / denom;
}

double care_residual(const Matrix& A, const Matrix& S, const Matrix& G, const Matrix& X) {
  const double denom = 2.0 * fro(A) * fro(X) + fro(S) * fro(X) * fro(X) + fro(G);
  if (denom == 0.0) return 0.0;
  return fro(A * X + X * A.transpose() + X * S * X + G) / denom;
}

namespace {

// Swaps diagonal entries k and k+1 of an upper-triangular complex Schur form.
void swap_adjacent(ComplexMatrix& T, ComplexMatrix& U, Index k) {
  const std::complex<double> t11 = T(k, k);
  const std::complex<double> t22 = T(k + 1, k + 1);
  if (t11 == t22) return;
  // First column of the rotation is an eigenvector of the 2x2 block for t22.
  std::complex<double> a = T(k, k + 1);
  std::complex<double> b = t22 - t11;
  const double nu = std::hypot(std::abs(a), std::abs(b));
  a /= nu;
  b /= nu;
  Eigen::Matrix2cd Z;
  Z << a, -std::conj(b), b, std::conj(a);
  T.middleRows(k, 2) = Z.adjoint() * T.middleRows(k, 2);
  T.middleCols(k, 2) = T.middleCols(k, 2) * Z;
  U.middleCols(k, 2) = U.middleCols(k, 2) * Z;
  T(k + 1, k) = 0.0;
}

}  // namespace

Matrix solve_care(const Matrix& A, const Matrix& S, const Matrix& G) {
  require_square(A, "CARE A");
  const Index r = A.rows();
  if (S.rows() != r || S.cols() != r || G.rows() != r || G.cols() != r) {
    throw Error(ErrorKind::kDimensionMismatch, "CARE coefficients must all be r x r");
  }
  require_finite(A, "CARE A");
  require_finite(S, "CARE S");
  require_finite(G, "CARE G");
  if (r == 0) return Matrix(0, 0);

  // X = beta·Y balances the quadratic and constant terms, which can differ by
  // many orders of magnitude (e.g. S, G scaled by (DDᵀ)⁻¹ for tiny D).
  const double s_norm = fro(S), g_norm = fro(G);
  const double beta = s_norm > 0.0 && g_norm > 0.0 ? std::sqrt(g_norm / s_norm) : 1.0;
  Matrix ham(2 * r, 2 * r);
  ham << A.transpose(), beta * S, -G / beta, -A;
  const double ham_norm = ham.norm();

  Eigen::ComplexSchur<ComplexMatrix> schur(2 * r);
  schur.compute(ham.cast<std::complex<double>>(), true);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorKind::kNonConvergence, "complex Schur iteration of the Hamiltonian did not converge");
  }
  ComplexMatrix T = schur.matrixT();
  ComplexMatrix U = schur.matrixU();

  // Only eigenvalues indistinguishable from the axis at roundoff level are
  // rejected here; a misclassified pair is caught by the closed-loop check.
  const double axis_tol = 1e2 * std::numeric_limits<double>::epsilon() * std::max(1.0, ham_norm);
  Index stable = 0;
  for (Index k = 0; k < 2 * r; ++k) {
    const double re = T(k, k).real();
    if (std::abs(re) <= axis_tol) {
      std::ostringstream os;
      os << "Hamiltonian eigenvalue " << T(k, k) << " lies on the imaginary axis";
      throw Error(ErrorKind::kNoStabilizingSolution, os.str());
    }
    if (re < 0.0) {
      for (Index j = k; j > stable; --j) swap_adjacent(T, U, j - 1);
      ++stable;
    }
  }
  if (stable != r) {
    std::ostringstream os;
    os << "Hamiltonian has " << stable << " stable eigenvalues, expected " << r;
    throw Error(ErrorKind::kNoStabilizingSolution, os.str());
  }

  const ComplexMatrix U1 = U.topLeftCorner(r, r);
  const ComplexMatrix U2 = U.bottomLeftCorner(r, r);
  Eigen::PartialPivLU<ComplexMatrix> lu(U1.transpose());
  const ComplexMatrix Xc = lu.solve(U2.transpose()).transpose();
  Matrix X = beta * Xc.real();
  X = Matrix(0.5 * (X + X.transpose()));
  if (!X.allFinite()) {
    throw Error(ErrorKind::kNoStabilizingSolution, "stable invariant subspace is not a graph subspace");
  }

  // Newton refinement on the closed-loop Lyapunov equation.
  double res = care_residual(A, S, G, X);
  for (int it = 0; it < 10 && res > 1e-13; ++it) {
    const Matrix closed = A + X * S;
    const Matrix R = A * X + X * A.transpose() + X * S * X + G;
    Matrix candidate;
    try {
      candidate = X + solve_lyapunov(closed, 0.5 * (R + R.transpose()));
    } catch (const Error&) {
      break;
    }
    const double next = care_residual(A, S, G, candidate);
    if (!(next < res)) break;
    X = candidate;
    res = next;
  }
  if (res > 1e-8) {
    std::ostringstream os;
    os << "CARE residual " << res << " exceeds 1e-8 after refinement";
    throw Error(ErrorKind::kNonConvergence, os.str());
  }
  if (!(spectral_abscissa(A + X * S) < 0.0)) {
    throw Error(ErrorKind::kNoStabilizingSolution,
                "CARE solution is not stabilizing (Hamiltonian eigenvalues near the imaginary axis)");
  }
  return X;
}

namespace {

constexpr std::array<double, 4> kB3 = {120.0, 60.0, 12.0, 1.0};
constexpr std::array<double, 6> kB5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
constexpr std::array<double, 8> kB7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                       25200.0,    1512.0,    56.0,      1.0};
constexpr std::array<double, 10> kB9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                        2162160.0,     110880.0,     3960.0,       90.0,        1.0};
constexpr std::array<double, 14> kB13 = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                         1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                         670442572800.0,      33522128640.0,       1323241920.0,
                                         40840800.0,          960960.0,            16380.0,
                                         182.0,               1.0};

template <std::size_t N>
Matrix pade_low(const Matrix& M, const std::array<double, N>& b) {
  const Index n = M.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix M2 = M * M;
  Matrix power = I;
  Matrix u = Matrix::Zero(n, n);
  Matrix v = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < N; k += 2) {
    v += b[k] * power;
    u += b[k + 1] * power;
    power = power * M2;
  }
  u = M * u;
  return (v - u).partialPivLu().solve(v + u);
}

Matrix pade13(const Matrix& M) {
  const Index n = M.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix M2 = M * M;
  const Matrix M4 = M2 * M2;
  const Matrix M6 = M4 * M2;
  const auto& b = kB13;
  const Matrix u_inner = M6 * (b[13] * M6 + b[11] * M4 + b[9] * M2) + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * I;
  const Matrix u = M * u_inner;
  const Matrix v = M6 * (b[12] * M6 + b[10] * M4 + b[8] * M2) + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * I;
  return (v - u).partialPivLu().solve(v + u);
}

}  // namespace

Matrix matrix_exponential(const Matrix& A, double t) {
  require_square(A, "matrix_exponential input");
  require_finite(A, "matrix_exponential input");
  if (!std::isfinite(t)) throw Error(ErrorKind::kInvalidArgument, "matrix_exponential time must be finite");
  const Index n = A.rows();
  if (t == 0.0 || n == 0) return Matrix::Identity(n, n);

  Matrix M = A * t;
  const double norm1 = M.cwiseAbs().colwise().sum().maxCoeff();
  Matrix E;
  if (norm1 <= 1.495585217958292e-2) {
    E = pade_low(M, kB3);
  } else if (norm1 <= 2.539398330063230e-1) {
    E = pade_low(M, kB5);
  } else if (norm1 <= 9.504178996162932e-1) {
    E = pade_low(M, kB7);
  } else if (norm1 <= 2.097847961257068e0) {
    E = pade_low(M, kB9);
  } else {
    const int s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / 5.371920351148152e0))));
    M /= std::ldexp(1.0, s);
    E = pade13(M);
    for (int k = 0; k < s; ++k) E = E * E;
  }
  if (!E.allFinite()) {
    std::ostringstream os;
    os << "matrix exponential overflowed (||A t||_1 = " << norm1 << ")";
    throw Error(ErrorKind::kOverflow, os.str());
  }
  return E;
}

Matrix expm_frechet(const Matrix& M, const Matrix& E) {
  require_square(M, "Frechet base");
  const Index n = M.rows();
  if (E.rows() != n || E.cols() != n) throw Error(ErrorKind::kDimensionMismatch, "Frechet direction size");
  Matrix big = Matrix::Zero(2 * n, 2 * n);
  big.topLeftCorner(n, n) = M;
  big.bottomRightCorner(n, n) = M;
  big.topRightCorner(n, n) = E;
  return matrix_exponential(big).topRightCorner(n, n);
}

double spectral_abscissa(const Matrix& A) {
  require_square(A, "spectral_abscissa input");
  if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(A, false);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::kNonConvergence, "eigenvalue iteration failed");
  return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const Matrix& A) { return spectral_abscissa(A) < 0.0; }

}  // namespace tlmor
