// SPDX-License-Identifier: Apache-2.0
#include "tlmor/gramians.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "tlmor/error.hpp"

namespace tlmor {

namespace {

void require_hurwitz(const StateSpaceModel& model) {
  if (model.states() == 0) return;
  const double alpha = spectral_abscissa(model.A);
  if (!(alpha < 0.0)) {
    std::ostringstream os;
    os << "time-limited gramians require a Hurwitz A (spectral abscissa " << alpha << ")";
    throw Error(ErrorKind::kUnsupportedModel, os.str());
  }
}

// e^{At1} F Fᵀ e^{Aᵀt1} − e^{At2} F Fᵀ e^{Aᵀt2} for F = B (or Cᵀ with transposed exponentials).
Matrix endpoint_difference(const Matrix& f1, const Matrix& f2) {
  return f1 * f1.transpose() - f2 * f2.transpose();
}

// Clips negative eigenvalues when they exceed roundoff level, recording a warning.
void enforce_psd(Matrix& M, const char* name, std::vector<std::string>& warnings) {
  if (M.rows() == 0) return;
  const double trace = M.trace();
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig >= -1e-10 * std::abs(trace)) return;
  std::ostringstream os;
  os << name << " had eigenvalue " << min_eig << " below -1e-10*trace; negative part clipped";
  warnings.push_back(os.str());
  const Vector clipped = es.eigenvalues().cwiseMax(0.0);
  M = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  M = Matrix(0.5 * (M + M.transpose()));
}

// Symmetric factor L with M = L Lᵀ for a PSD M (negative roundoff eigenvalues zeroed).
Matrix psd_factor(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(0.5 * (M + M.transpose())));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

BalancedRealization balanced_realization(const StateSpaceModel& model) {
  require_hurwitz(model);
  BalancedRealization out;
  const Index n = model.states();
  if (n == 0) {
    out.model = model;
    out.T = out.T_inv = Matrix(0, 0);
    out.hankel = Vector(0);
    return out;
  }
  const Matrix lp = psd_factor(infinite_controllability_gramian(model));
  const Matrix lq = psd_factor(infinite_observability_gramian(model));
  Eigen::BDCSVD<Matrix> svd(lq.transpose() * lp, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sigma = svd.singularValues();
  if (!(sigma(n - 1) > 1e-13 * sigma(0))) {
    std::ostringstream os;
    os << "realization is numerically non-minimal (Hankel singular value ratio " << sigma(n - 1) / sigma(0) << ")";
    throw Error(ErrorKind::kRank, os.str());
  }
  const Vector scale = sigma.cwiseSqrt().cwiseInverse();
  out.T = lp * svd.matrixV() * scale.asDiagonal();
  out.T_inv = scale.asDiagonal() * svd.matrixU().transpose() * lq.transpose();
  out.model = StateSpaceModel(out.T_inv * model.A * out.T, out.T_inv * model.B, model.C * out.T, model.D);
  out.hankel = sigma;
  return out;
}

FullOrderWorkspace::FullOrderWorkspace(StateSpaceModel model, TimeInterval interval)
    : model_(std::move(model)), interval_(interval) {
  interval_.validate();
  require_hurwitz(model_);
  schur_ = real_schur(model_.A);
  exp_t1_ = matrix_exponential(model_.A, interval_.t1);
  exp_t2_ = matrix_exponential(model_.A, interval_.t2);
}

const Matrix& FullOrderWorkspace::derived(const std::string& key, const std::function<Matrix()>& compute) const {
  std::promise<Matrix> promise;
  std::shared_future<Matrix> future;
  bool owner = false;
  {
    const std::lock_guard lock(derived_mutex_);
    auto it = derived_.find(key);
    if (it == derived_.end()) {
      it = derived_.emplace(key, promise.get_future().share()).first;
      owner = true;
    }
    future = it->second;
  }
  if (owner) {
    try {
      promise.set_value(compute());
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  // The map keeps the shared state alive, so the reference outlives `future`.
  return future.get();
}

const Matrix& FullOrderWorkspace::controllability() const {
  std::call_once(p_once_, [this] {
    const Matrix w = endpoint_difference(exp_t1_ * model_.B, exp_t2_ * model_.B);
    p_ = solve_lyapunov(op(schur_), w);
  });
  return p_;
}

const Matrix& FullOrderWorkspace::observability() const {
  std::call_once(q_once_, [this] {
    const Matrix w = endpoint_difference(exp_t1_.transpose() * model_.C.transpose(),
                                         exp_t2_.transpose() * model_.C.transpose());
    q_ = solve_lyapunov(op(schur_).t(), w);
  });
  return q_;
}

const Matrix& FullOrderWorkspace::infinite_controllability() const {
  std::call_once(pinf_once_, [this] { pinf_ = solve_lyapunov(op(schur_), model_.B * model_.B.transpose()); });
  return pinf_;
}

const Matrix& FullOrderWorkspace::infinite_observability() const {
  std::call_once(qinf_once_,
                 [this] { qinf_ = solve_lyapunov(op(schur_).t(), model_.C.transpose() * model_.C); });
  return qinf_;
}

WorkspacePtr make_workspace(const StateSpaceModel& model, const TimeInterval& interval) {
  return std::make_shared<const FullOrderWorkspace>(model, interval);
}

GramianPair tl_gramians(const StateSpaceModel& model, const TimeInterval& interval) {
  const FullOrderWorkspace ws(model, interval);
  GramianPair out{ws.controllability(), ws.observability(), interval, {}};
  enforce_psd(out.P, "P", out.warnings);
  enforce_psd(out.Q, "Q", out.warnings);
  return out;
}

double h2tau_norm(const StateSpaceModel& model, const TimeInterval& interval) {
  const GramianPair g = tl_gramians(model, interval);
  const double p_form = (model.C * g.P * model.C.transpose()).trace();
  const double q_form = (model.B.transpose() * g.Q * model.B).trace();
  const double scale = std::max(std::abs(p_form), std::abs(q_form));
  const double floor = 1e-14 * (model.C.squaredNorm() * g.P.norm() + model.B.squaredNorm() * g.Q.norm());
  if (std::abs(p_form - q_form) > 1e-8 * scale + floor) {
    std::ostringstream os;
    os << "P-form " << p_form << " and Q-form " << q_form << " of the squared norm disagree";
    throw Error(ErrorKind::kConsistency, os.str());
  }
  return std::sqrt(std::max(0.0, p_form));
}

double quadrature_h2tau_oracle(const StateSpaceModel& model, const TimeInterval& interval, int panels) {
  interval.validate();
  if (panels < 2) throw Error(ErrorKind::kInvalidArgument, "quadrature needs at least 2 panels");
  if (panels % 2 != 0) ++panels;
  if (model.states() == 0 || interval.length() == 0.0) return 0.0;
  const double h = interval.length() / panels;
  const Matrix step = matrix_exponential(model.A, h);
  Matrix state = matrix_exponential(model.A, interval.t1) * model.B;
  double sum = 0.0;
  for (int k = 0; k <= panels; ++k) {
    const double f = (model.C * state).squaredNorm();
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    sum += w * f;
    state = step * state;
  }
  return std::sqrt(std::max(0.0, sum * h / 3.0));
}

Matrix infinite_controllability_gramian(const StateSpaceModel& model) {
  require_hurwitz(model);
  return solve_lyapunov(model.A, model.B * model.B.transpose());
}

Matrix infinite_observability_gramian(const StateSpaceModel& model) {
  require_hurwitz(model);
  return solve_lyapunov(Matrix(model.A.transpose()), model.C.transpose() * model.C);
}

}  // namespace tlmor
