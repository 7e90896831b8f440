// SPDX-License-Identifier: Apache-2.0
#include "tlmor/lti_model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "tlmor/error.hpp"

namespace tlmor {

namespace {

std::string dims(const Matrix& M) {
  std::ostringstream os;
  os << M.rows() << "x" << M.cols();
  return os.str();
}

std::vector<std::string> dimension_problems(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D) {
  std::vector<std::string> out;
  const Index n = A.rows();
  if (A.cols() != n) out.push_back("A is " + dims(A) + ", not square");
  if (B.rows() != n) out.push_back("B is " + dims(B) + " but A has " + std::to_string(n) + " states");
  if (C.cols() != n) out.push_back("C is " + dims(C) + " but A has " + std::to_string(n) + " states");
  if (B.cols() != D.cols()) out.push_back("B is " + dims(B) + " but D is " + dims(D) + " (inputs)");
  if (C.rows() != D.rows()) out.push_back("C is " + dims(C) + " but D is " + dims(D) + " (outputs)");
  return out;
}

}  // namespace

StateSpaceModel::StateSpaceModel(Matrix a, Matrix b, Matrix c, Matrix d)
    : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
  const auto problems = dimension_problems(A, B, C, D);
  if (!problems.empty()) throw Error(ErrorKind::kDimensionMismatch, problems.front());
  if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, "state-space matrices contain non-finite entries");
  }
}

StateSpaceModel StateSpaceModel::with_feedthrough(const Matrix& d) const { return {A, B, C, d}; }

void TimeInterval::validate() const {
  if (!std::isfinite(t1) || !std::isfinite(t2) || t1 < 0.0 || t1 > t2) {
    std::ostringstream os;
    os << "time interval [" << t1 << ", " << t2 << "] must satisfy 0 <= t1 <= t2 < inf";
    throw Error(ErrorKind::kInvalidArgument, os.str());
  }
}

Index numerical_rank(const Matrix& M, double rel_tol) {
  if (M.size() == 0) return 0;
  const Vector sv = Eigen::JacobiSVD<Matrix>(M).singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  if (smax == 0.0) return 0;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * smax) ++rank;
  }
  return rank;
}

bool has_full_rank_feedthrough(const StateSpaceModel& model) {
  return numerical_rank(model.D) == std::min(model.D.rows(), model.D.cols());
}

std::vector<Diagnostic> validate(const StateSpaceModel& model) {
  std::vector<Diagnostic> out;
  const auto problems = dimension_problems(model.A, model.B, model.C, model.D);
  for (const auto& p : problems) out.push_back({DiagnosticCode::kDimensionMismatch, p});
  if (!model.A.allFinite() || !model.B.allFinite() || !model.C.allFinite() || !model.D.allFinite()) {
    out.push_back({DiagnosticCode::kNonFinite, "non-finite entries present"});
    return out;
  }
  if (model.A.rows() == model.A.cols() && model.A.rows() > 0) {
    const double alpha = spectral_abscissa(model.A);
    if (alpha >= 0.0) {
      std::ostringstream os;
      os << "A not Hurwitz (spectral abscissa " << alpha << ")";
      out.push_back({DiagnosticCode::kNotHurwitz, os.str()});
    }
  }
  if (numerical_rank(model.D) < std::min(model.D.rows(), model.D.cols())) {
    out.push_back({DiagnosticCode::kRankDeficientD, "D rank-deficient"});
  }
  return out;
}

InverseRealization inverse_realization(const StateSpaceModel& model) {
  if (!model.is_square()) {
    throw Error(ErrorKind::kInversion, "inverse realization needs a square system, got D " + dims(model.D));
  }
  if (numerical_rank(model.D) < model.D.rows()) {
    throw Error(ErrorKind::kInversion, "feedthrough D is singular");
  }
  const Matrix d_inv = model.D.fullPivLu().inverse();
  return {model.A - model.B * d_inv * model.C, -model.B * d_inv, d_inv * model.C, d_inv};
}

Matrix epsilon_regularize(const Matrix& D, double eps) {
  if (D.rows() != D.cols()) throw Error(ErrorKind::kInvalidArgument, "epsilon regularization needs square D");
  if (!(eps > 0.0)) throw Error(ErrorKind::kInvalidArgument, "epsilon must be positive");
  if (numerical_rank(D) < D.rows()) return eps * Matrix::Identity(D.rows(), D.cols());
  return D;
}

std::vector<Matrix> impulse_response(const StateSpaceModel& model, const std::vector<double>& grid) {
  std::vector<Matrix> out;
  out.reserve(grid.size());
  const Index n = model.states();
  if (n == 0) {
    for (std::size_t k = 0; k < grid.size(); ++k) out.push_back(Matrix::Zero(model.outputs(), model.inputs()));
    return out;
  }
  Matrix state;  // e^{A t_k} B
  double t_prev = 0.0;
  double step_cached = std::numeric_limits<double>::quiet_NaN();
  Matrix step_exp;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double t = grid[k];
    if (!(t >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "impulse response grid must be non-negative");
    if (k == 0) {
      state = matrix_exponential(model.A, t) * model.B;
    } else {
      const double dt = t - t_prev;
      if (dt < 0.0) throw Error(ErrorKind::kInvalidArgument, "impulse response grid must be ordered");
      if (!(std::abs(dt - step_cached) <= 1e-14 * std::max(1.0, std::abs(dt)))) {
        step_exp = matrix_exponential(model.A, dt);
        step_cached = dt;
      }
      state = step_exp * state;
    }
    out.push_back(model.C * state);
    t_prev = t;
  }
  return out;
}

ComplexMatrix transfer_function(const StateSpaceModel& model, std::complex<double> s) {
  const Index n = model.states();
  ComplexMatrix out = model.D.cast<std::complex<double>>();
  if (n == 0) return out;
  ComplexMatrix resolvent = -model.A.cast<std::complex<double>>();
  resolvent.diagonal().array() += s;
  out += model.C.cast<std::complex<double>>() *
         resolvent.partialPivLu().solve(model.B.cast<std::complex<double>>());
  return out;
}

StateSpaceModel additive_error_system(const StateSpaceModel& full, const StateSpaceModel& reduced) {
  if (full.inputs() != reduced.inputs() || full.outputs() != reduced.outputs()) {
    throw Error(ErrorKind::kDimensionMismatch, "full and reduced models have different input/output counts");
  }
  const Index n = full.states();
  const Index r = reduced.states();
  Matrix A = Matrix::Zero(n + r, n + r);
  A.topLeftCorner(n, n) = full.A;
  A.bottomRightCorner(r, r) = reduced.A;
  Matrix B(n + r, full.inputs());
  B << full.B, reduced.B;
  Matrix C(full.outputs(), n + r);
  C << full.C, -reduced.C;
  return {A, B, C, full.D - reduced.D};
}

bool is_minimum_phase(const StateSpaceModel& model) {
  if (!model.is_square() || numerical_rank(model.D) < model.D.rows()) return false;
  return is_hurwitz(inverse_realization(model).A);
}

}  // namespace tlmor
