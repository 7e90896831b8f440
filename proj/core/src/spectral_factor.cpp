// SPDX-License-Identifier: Apache-2.0
#include "tlmor/spectral_factor.hpp"

#include <optional>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "tlmor/error.hpp"
#include "tlmor/gramians.hpp"

namespace tlmor {

namespace {

// The Riccati equation of the factor equals −AX − XAᵀ + KᵀΦK = 0 with
// K = Bᵀ − B_sᵀX. That form avoids the cancellation between the O(‖S‖‖X‖²)
// terms of the expanded residual, so Newton steps driven by it recover the
// digits the Hamiltonian solve loses when ‖X‖ is large.
Matrix factored_residual(const Matrix& A, const Matrix& B, const Matrix& b_s, const Matrix& gain_inv,
                         const Matrix& X) {
  const Matrix K = B.transpose() - b_s.transpose() * X;
  const Matrix R = -A * X - X * A.transpose() + K.transpose() * gain_inv * K;
  return 0.5 * (R + R.transpose());
}

Matrix refine_factor_riccati(const Matrix& A, const Matrix& B, const Matrix& b_s, const Matrix& gain_inv,
                             const Matrix& a_s, const Matrix& S, Matrix X) {
  Matrix R = factored_residual(A, B, b_s, gain_inv, X);
  for (int step = 0; step < 5 && R.norm() > 0.0; ++step) {
    const Matrix closed = a_s + X * S;
    Matrix candidate = X + solve_lyapunov(closed, R);
    candidate = Matrix(0.5 * (candidate + candidate.transpose()));
    const Matrix next = factored_residual(A, B, b_s, gain_inv, candidate);
    if (!(next.norm() < R.norm())) break;
    X = std::move(candidate);
    R = next;
  }
  return X;
}

// Hankel singular values at or below this fraction of the largest are treated
// as non-minimal modes; their mirrored poles cannot be moved by the factor's
// Riccati feedback and would stay unstable in A_xi.
constexpr double kMinimalHankelTol = 1e-13;

Matrix psd_sqrt(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
  const Vector eigs = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * eigs.cwiseSqrt().asDiagonal();
}

// Square-root balancing data; truncations to any order q are read off it.
class HankelBasis {
 public:
  explicit HankelBasis(const StateSpaceModel& model)
      : model_(model),
        lp_(psd_sqrt(infinite_controllability_gramian(model))),
        lq_(psd_sqrt(infinite_observability_gramian(model))),
        svd_(lq_.transpose() * lp_, Eigen::ComputeFullU | Eigen::ComputeFullV) {}

  [[nodiscard]] Index minimal_order() const {
    const Vector& sigma = svd_.singularValues();
    Index q = 0;
    while (q < sigma.size() && sigma(q) > kMinimalHankelTol * sigma(0)) ++q;
    return q;
  }

  // Balanced truncation to order q with x ≈ T z; the transfer function
  // changes by at most twice the sum of the discarded values.
  [[nodiscard]] double truncation_bound(Index q) const {
    const Vector& sigma = svd_.singularValues();
    return 2.0 * sigma.tail(sigma.size() - q).sum();
  }

  [[nodiscard]] StateSpaceModel truncate(Index q, Matrix& T) const {
    const Vector scale = svd_.singularValues().head(q).cwiseSqrt().cwiseInverse();
    T = lp_ * svd_.matrixV().leftCols(q) * scale.asDiagonal();
    const Matrix t_inv = scale.asDiagonal() * svd_.matrixU().leftCols(q).transpose() * lq_.transpose();
    return {t_inv * model_.A * T, t_inv * model_.B, model_.C * T, model_.D};
  }

 private:
  const StateSpaceModel& model_;
  Matrix lp_, lq_;
  Eigen::BDCSVD<Matrix> svd_;
};

SpectralFactorInverse construct(const StateSpaceModel& reduced) {
  const Matrix& A = reduced.A;
  const Matrix& B = reduced.B;
  const Matrix& C = reduced.C;
  const Matrix& D = reduced.D;

  const Matrix gram = solve_lyapunov(Matrix(A.transpose()), C.transpose() * C);
  const Matrix gain_inv = (D.transpose() * D).inverse();
  const Matrix b_s = -gram * B - C.transpose() * D;
  const Matrix a_s = -A - B * gain_inv * b_s.transpose();
  const Matrix S = b_s * gain_inv * b_s.transpose();
  const Matrix X = refine_factor_riccati(A, B, b_s, gain_inv, a_s, S,
                                         solve_care(a_s, S, B * gain_inv * B.transpose()));

  const Matrix d_inv_t = D.transpose().inverse();
  const Matrix a_x = -A.transpose();
  const Matrix& b_x = b_s;
  const Matrix c_x = d_inv_t * (B.transpose() - b_s.transpose() * X);
  const Matrix d_inv = D.inverse();

  SpectralFactorInverse out;
  out.factor = StateSpaceModel(a_x, b_x, c_x, D);
  out.A_xi = a_x - b_x * d_inv * c_x;
  out.B_xi = -b_x * d_inv;
  out.C_xi = d_inv * c_x;
  out.D_xi = d_inv;
  out.riccati_solution = X;
  out.observability = gram;

  if (out.A_xi.rows() > 0 && !is_hurwitz(out.A_xi)) {
    std::ostringstream os;
    os << "inverse spectral factor is not stable; spectral abscissa of A_xi " << spectral_abscissa(out.A_xi)
       << ", of the reduced A " << spectral_abscissa(A);
    throw Error(ErrorKind::kConstruction, os.str());
  }
  return out;
}

}  // namespace

SpectralFactorInverse build_spectral_factor_inverse(const StateSpaceModel& reduced) {
  if (!reduced.is_square()) throw Error(ErrorKind::kInvalidArgument, "spectral factor needs a square system");
  if (numerical_rank(reduced.D) < reduced.D.rows()) {
    throw Error(ErrorKind::kInversion, "spectral factor needs an invertible D (regularize upstream)");
  }
  if (reduced.states() > 0 && !is_hurwitz(reduced.A)) {
    throw Error(ErrorKind::kUnsupportedModel, "spectral factor needs a stable reduced model");
  }
  // The factor's transfer function does not depend on the state basis, but the
  // Riccati solution is far better conditioned in balanced coordinates. Weakly
  // controllable or observable modes are dropped, smallest first, while the
  // realization of the inverse factor is not stable: with a small D the
  // feedback amplifies roundoff in exactly those directions.
  const Index r = reduced.states();
  if (r > 0) {
    const HankelBasis hankel(reduced);
    std::optional<Error> last;
    for (Index q = hankel.minimal_order(); q >= 1; --q) {
      Matrix T;
      try {
        SpectralFactorInverse out = construct(hankel.truncate(q, T));
        out.basis = std::move(T);
        out.discarded_states = r - q;
        out.truncation_bound = hankel.truncation_bound(q);
        return out;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kConstruction && e.kind() != ErrorKind::kNoStabilizingSolution) throw;
        if (!last) last = e;
      }
    }
    if (last) throw *last;
  }
  SpectralFactorInverse out = construct(reduced);
  out.basis = Matrix::Identity(r, r);
  return out;
}

}  // namespace tlmor
