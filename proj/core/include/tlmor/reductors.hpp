// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tlmor/gramians.hpp"

namespace tlmor {

// Oblique projection Π = V Wᵀ with Wᵀ V = I.
struct ProjectionPair {
  Matrix V;
  Matrix W;
  Vector sigma;  // balancing values when produced by a contragradient transformation

  [[nodiscard]] double biorthogonality_error() const;
};

// Invoked for every projection pair handed out by this module (test hook).
using ProjectionObserver = std::function<void(const ProjectionPair&, std::string_view origin)>;
void set_projection_observer(ProjectionObserver observer);

enum class InitStrategy { kRandomStable, kDominantEigs };

std::string_view to_string(InitStrategy strategy) noexcept;
InitStrategy parse_init_strategy(std::string_view text);

struct ReductorConfig {
  Index order = 1;
  TimeInterval interval;
  double epsilon = 1e-4;
  int max_iter = 50;
  double conv_tol = 1e-6;
  InitStrategy init = InitStrategy::kRandomStable;
  std::uint64_t seed = 0;
  int restarts = 3;
  // Overrides the seeded initial guess of the iterative methods.
  std::optional<StateSpaceModel> initial_rom;

  void validate(Index full_order) const;
};

struct ReductionResult {
  StateSpaceModel rom;
  std::optional<ProjectionPair> projection;
  int iterations = 0;
  bool converged = true;
  std::vector<double> history;  // relative eigenvalue change per iteration
  std::vector<std::string> diagnostics;
  int restarts_used = 0;
};

// Square-root construction: WᵀPW = VᵀQV = diag(σ1..σr), σ non-increasing.
ProjectionPair contragradient_projection(const Matrix& P, const Matrix& Q, Index order);

// Petrov–Galerkin reduction (WᵀAV, WᵀB, CV, D).
StateSpaceModel project(const StateSpaceModel& model, const ProjectionPair& pair);

ReductionResult tlbt(const StateSpaceModel& model, const ReductorConfig& cfg, WorkspacePtr workspace = nullptr);
ReductionResult tlbst(const StateSpaceModel& model, const ReductorConfig& cfg, WorkspacePtr workspace = nullptr);
ReductionResult tlirka(const StateSpaceModel& model, const ReductorConfig& cfg, WorkspacePtr workspace = nullptr);
ReductionResult tlrhmora(const StateSpaceModel& model, const ReductorConfig& cfg, WorkspacePtr workspace = nullptr);

// Pairs columns of the two bases so that Wᵀ V = I.
ProjectionPair biorthogonal_gram_schmidt(const Matrix& right, const Matrix& left);

StateSpaceModel initial_guess(const StateSpaceModel& model, Index order, InitStrategy strategy, std::uint64_t seed);

// Largest relative change between the sorted eigenvalue lists.
double eigenvalue_change(const Matrix& previous, const Matrix& current);

}  // namespace tlmor
