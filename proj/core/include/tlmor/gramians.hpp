// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "tlmor/lti_model.hpp"

namespace tlmor {

struct GramianPair {
  Matrix P;
  Matrix Q;
  TimeInterval interval;
  std::vector<std::string> warnings;
};

// P solves AP + PAᵀ + e^{At1}BBᵀe^{Aᵀt1} − e^{At2}BBᵀe^{Aᵀt2} = 0, Q the dual.
GramianPair tl_gramians(const StateSpaceModel& model, const TimeInterval& interval);

double h2tau_norm(const StateSpaceModel& model, const TimeInterval& interval);

// Composite Simpson rule for the integral of ||C e^{At} B||_F^2 over the interval.
// An odd panel count is rounded up to the next even number.
double quadrature_h2tau_oracle(const StateSpaceModel& model, const TimeInterval& interval, int panels);

// Infinite-horizon gramians (A Hurwitz).
Matrix infinite_controllability_gramian(const StateSpaceModel& model);
Matrix infinite_observability_gramian(const StateSpaceModel& model);

// Similarity transform x = T z to infinite-horizon balanced coordinates.
struct BalancedRealization {
  StateSpaceModel model;  // (T⁻¹AT, T⁻¹B, CT, D)
  Matrix T;
  Matrix T_inv;
  Vector hankel;  // Hankel singular values, non-increasing
};

// Square-root balancing of a stable minimal model. Throws kRank when the
// gramian product is numerically singular (non-minimal realization).
BalancedRealization balanced_realization(const StateSpaceModel& model);

// Per-model data reused by every reduced-model evaluation against the same
// full model: Schur factor of A, endpoint exponentials and gramians.
// Gramians are computed on first use; all accessors are thread-safe.
class FullOrderWorkspace {
 public:
  FullOrderWorkspace(StateSpaceModel model, TimeInterval interval);
  FullOrderWorkspace(const FullOrderWorkspace&) = delete;
  FullOrderWorkspace& operator=(const FullOrderWorkspace&) = delete;

  [[nodiscard]] const StateSpaceModel& model() const noexcept { return model_; }
  [[nodiscard]] const TimeInterval& interval() const noexcept { return interval_; }
  [[nodiscard]] const RealSchurForm& schur() const noexcept { return schur_; }
  [[nodiscard]] const Matrix& exp_t1() const noexcept { return exp_t1_; }
  [[nodiscard]] const Matrix& exp_t2() const noexcept { return exp_t2_; }

  [[nodiscard]] const Matrix& controllability() const;
  [[nodiscard]] const Matrix& observability() const;
  [[nodiscard]] const Matrix& infinite_controllability() const;
  [[nodiscard]] const Matrix& infinite_observability() const;

  // Order-independent data derived from the model by a reduction method
  // (keyed by the caller, e.g. including ε). `compute` runs at most once per
  // key; concurrent callers wait for the first.
  [[nodiscard]] const Matrix& derived(const std::string& key, const std::function<Matrix()>& compute) const;

 private:
  StateSpaceModel model_;
  TimeInterval interval_;
  RealSchurForm schur_;
  Matrix exp_t1_;
  Matrix exp_t2_;
  mutable std::once_flag p_once_, q_once_, pinf_once_, qinf_once_;
  mutable Matrix p_, q_, pinf_, qinf_;
  mutable std::mutex derived_mutex_;
  mutable std::map<std::string, std::shared_future<Matrix>> derived_;
};

using WorkspacePtr = std::shared_ptr<const FullOrderWorkspace>;

WorkspacePtr make_workspace(const StateSpaceModel& model, const TimeInterval& interval);

}  // namespace tlmor
