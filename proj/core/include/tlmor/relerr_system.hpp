// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "tlmor/gramians.hpp"

namespace tlmor {

// Which stable system multiplies the additive error from the left.
enum class WeightKind {
  kInverse,         // Ĥ⁻¹
  kSpectralFactor,  // Ĝ⁻*, stable even when Ĥ is not minimum-phase
};

// Per-endpoint data: exponentials of the three diagonal blocks and the
// off-diagonal coupling E(t) = [E1(t) E2(t)] of e^{A_rel t}.
struct EndpointData {
  double t = 0.0;
  double sign = 1.0;  // +1 at the lower limit, -1 at the upper limit
  Matrix exp_full;
  Matrix exp_rom;
  Matrix exp_weight;
  Matrix E1;  // q x n
  Matrix E2;  // q x r
  bool coupling_from_exponential = false;
};

// Cascade realization W·(H − Ĥ) with inner weight W = (A3, B3, C3, D3):
//   A_rel = [[A, 0, 0], [0, Â, 0], [B3·C, −B3·Ĉ, A3]]
//   B_rel = [B; B̂; 0],  C_rel = [D3·C, −D3·Ĉ, C3].
struct RelErrorSystem {
  WorkspacePtr workspace;
  StateSpaceModel rom;
  StateSpaceModel weight;
  WeightKind kind = WeightKind::kInverse;
  RealSchurForm rom_schur;
  RealSchurForm weight_schur;
  std::vector<EndpointData> endpoints;  // lower limit first
  // Relative mismatch between the Sylvester E2 and e^{Ât} − e^{A_i t} (inverse weight only).
  double e2_closed_form_deviation = 0.0;
  std::vector<std::string> diagnostics;

  [[nodiscard]] const StateSpaceModel& full() const { return workspace->model(); }
  [[nodiscard]] const TimeInterval& interval() const { return workspace->interval(); }
  [[nodiscard]] const Matrix& E1() const { return endpoints.back().E1; }
  [[nodiscard]] const Matrix& E2() const { return endpoints.back().E2; }
  [[nodiscard]] bool weight_is_stable() const;
  // Monolithic (A_rel, B_rel, C_rel, 0).
  [[nodiscard]] StateSpaceModel assembled() const;
};

RelErrorSystem build_relerr(const StateSpaceModel& full, const StateSpaceModel& reduced,
                            const TimeInterval& interval);
RelErrorSystem build_relerr(WorkspacePtr workspace, const StateSpaceModel& reduced,
                            const StateSpaceModel& weight, WeightKind kind);

struct RelGramianBlocks {
  Matrix P11, P12, P13, P22, P23, P33;
  Matrix Q11, Q12, Q13, Q22, Q23, Q33;
  // Constant terms of the block equations (everything except the two
  // Sylvester-operator terms of each unknown).
  Matrix K13, K22, K23, K33;
  Matrix L11, L12, L13, L22, L23, L33;
  // max of the three relative deviations in Q12 = −Q13, Q22 = −Q23 = Q33 (inverse weight).
  double block_identity_deviation = 0.0;

  [[nodiscard]] Matrix assembled_P() const;
  [[nodiscard]] Matrix assembled_Q() const;
};

enum class BlockSet {
  kAll,
  kObservabilityCoupling,  // Q33, Q13, Q23, Q12 only
};

RelGramianBlocks relerr_gramian_blocks(const RelErrorSystem& sys, BlockSet set = BlockSet::kAll);

// Same block recursions with the infinite-horizon right-hand sides
// (a single lower limit at t = 0, no upper limit).
RelGramianBlocks relerr_infinite_blocks(const RelErrorSystem& sys);

struct RelativeErrorOptions {
  double epsilon = 1e-4;
  // Replace a rank-deficient D of the reduced model by epsilon·I inside the weight.
  bool regularize = true;
  WeightKind weight = WeightKind::kInverse;
  // With the inverse weight: switch to the spectral factor when Ĥ⁻¹ is unstable
  // (its time-limited exponentials overflow for ε-regularized non-minimum-phase models).
  bool stable_fallback = true;
};

struct ErrorEvaluation {
  double value = 0.0;   // norm from the P-form, or from factored gramians near roundoff
  double p_form = 0.0;  // squared norms
  double q_form = 0.0;
  bool forms_agree = true;
  bool weight_stable = true;
  bool regularized = false;
  WeightKind weight_used = WeightKind::kInverse;
  std::vector<std::string> diagnostics;
};

double h2tau_relative_error(const StateSpaceModel& full, const StateSpaceModel& reduced,
                            const TimeInterval& interval, const RelativeErrorOptions& options = {});
ErrorEvaluation evaluate_relative_error(WorkspacePtr workspace, const StateSpaceModel& reduced,
                                        const RelativeErrorOptions& options = {});
ErrorEvaluation evaluate_relative_error(const RelErrorSystem& sys);

double h2tau_additive_error(const StateSpaceModel& full, const StateSpaceModel& reduced,
                            const TimeInterval& interval);
ErrorEvaluation evaluate_additive_error(WorkspacePtr workspace, const StateSpaceModel& reduced);

// Squared relative error J(Ĥ) with the plain inverse weight (P-form).
double relative_cost(WorkspacePtr workspace, const StateSpaceModel& reduced);

}  // namespace tlmor
