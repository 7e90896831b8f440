// SPDX-License-Identifier: Apache-2.0
#include "tlmor/optimality.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <sstream>
#include <thread>

#include "tlmor/error.hpp"

namespace tlmor {

namespace {

void check_preconditions(const StateSpaceModel& full, const StateSpaceModel& reduced, const TimeInterval& interval) {
  interval.validate();
  if (!reduced.is_square() || !full.is_square()) {
    throw Error(ErrorKind::kInvalidArgument, "optimality conditions need square models");
  }
  if (full.inputs() != reduced.inputs()) {
    throw Error(ErrorKind::kDimensionMismatch, "full and reduced models have different input counts");
  }
  if (!has_full_rank_feedthrough(reduced)) {
    throw Error(ErrorKind::kInversion, "optimality conditions need an invertible D");
  }
  if (!is_hurwitz(full.A) || (reduced.states() > 0 && !is_hurwitz(reduced.A))) {
    throw Error(ErrorKind::kUnsupportedModel, "optimality conditions need stable full and reduced models");
  }
  if (!is_minimum_phase(reduced)) {
    throw Error(ErrorKind::kUnsupportedModel, "optimality conditions need a minimum-phase reduced model");
  }
}

void require_zero_start(const TimeInterval& interval) {
  if (interval.t1 != 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "closed-form auxiliaries are defined for intervals [0, t_d]");
  }
}

// Cascade (A_rel, B_rel, C_rel) with its time-limited and infinite gramians,
// solved monolithically so the gradient does not share code with the block
// recursions it is used to check.
struct Cascade {
  Index n = 0, r = 0;
  StateSpaceModel rel;
  InverseRealization inverse;
  Matrix full_C, rom_C;
  Matrix P_tau, Q_tau, P_inf, Q_inf;
  std::vector<std::pair<double, double>> endpoints;  // (t, sign)
};

Cascade make_cascade(const StateSpaceModel& full, const StateSpaceModel& reduced, const TimeInterval& interval) {
  Cascade c;
  c.n = full.states();
  c.r = reduced.states();
  const RelErrorSystem sys = build_relerr(full, reduced, interval);
  c.inverse = sys.weight;
  c.full_C = full.C;
  c.rom_C = reduced.C;
  c.rel = sys.assembled();
  const Matrix& A = c.rel.A;
  const Matrix BB = c.rel.B * c.rel.B.transpose();
  const Matrix CC = c.rel.C.transpose() * c.rel.C;
  c.endpoints = {{interval.t1, 1.0}, {interval.t2, -1.0}};
  Matrix p_rhs = Matrix::Zero(A.rows(), A.rows());
  Matrix q_rhs = p_rhs;
  for (const auto& [t, sign] : c.endpoints) {
    const Matrix e = matrix_exponential(A, t);
    p_rhs += sign * e * BB * e.transpose();
    q_rhs += sign * e.transpose() * CC * e;
  }
  c.P_tau = solve_lyapunov(A, p_rhs);
  c.Q_tau = solve_lyapunov(Matrix(A.transpose()), q_rhs);
  c.P_inf = solve_lyapunov(A, BB);
  c.Q_inf = solve_lyapunov(Matrix(A.transpose()), CC);
  return c;
}

// Gradients of J with respect to A_rel, B_rel, C_rel mapped onto (Â, B̂, Ĉ)
// through A_i = Â − B̂D⁻¹Ĉ, B_i = −B̂D⁻¹, C_i = D⁻¹Ĉ.
JGradient chain_to_reduced(const Cascade& c, const Matrix& gA, const Matrix& gB, const Matrix& gC) {
  const Index n = c.n, r = c.r;
  const Matrix& D_i = c.inverse.D;
  const Matrix& B_i = c.inverse.B;

  const Matrix G22 = gA.block(n, n, r, r);
  const Matrix G31 = gA.block(n + r, 0, r, n);
  const Matrix G32 = gA.block(n + r, n, r, r);
  const Matrix G33 = gA.block(n + r, n + r, r, r);

  JGradient out;
  out.dA = G22 + G33;
  out.dB = gB.middleRows(n, r) - G31 * c.full_C.transpose() * D_i.transpose() +
           (G32 - G33) * c.rom_C.transpose() * D_i.transpose();
  out.dC = B_i.transpose() * (G33 - G32) + D_i.transpose() * (gC.middleCols(n + r, r) - gC.middleCols(n, r));
  return out;
}

JGradient exact_gradient(const Cascade& c, GradientRoute route) {
  const Matrix& A = c.rel.A;
  const Matrix& B = c.rel.B;
  const Matrix& C = c.rel.C;
  Matrix gA;
  if (route == GradientRoute::kObservability) {
    gA = 2.0 * c.Q_tau * c.P_inf;
    const Matrix CC = C.transpose() * C;
    for (const auto& [t, sign] : c.endpoints) {
      if (t == 0.0) continue;
      const Matrix dir = CC * matrix_exponential(A, t) * c.P_inf;
      gA += 2.0 * sign * t * expm_frechet(Matrix(A.transpose() * t), dir);
    }
  } else {
    gA = 2.0 * c.Q_inf * c.P_tau;
    const Matrix BB = B * B.transpose();
    for (const auto& [t, sign] : c.endpoints) {
      if (t == 0.0) continue;
      const Matrix dir = c.Q_inf * matrix_exponential(A, t) * BB;
      gA += 2.0 * sign * t * expm_frechet(Matrix(A.transpose() * t), dir);
    }
  }
  return chain_to_reduced(c, gA, 2.0 * c.Q_tau * B, 2.0 * C * c.P_tau);
}

OptimalityResidual halve(const JGradient& g) {
  OptimalityResidual out;
  out.G_A = 0.5 * g.dA;
  out.G_B = 0.5 * g.dB;
  out.G_C = 0.5 * g.dC;
  out.norm_A = out.G_A.norm();
  out.norm_B = out.G_B.norm();
  out.norm_C = out.G_C.norm();
  return out;
}

}  // namespace

double AuxiliaryQuantities::max_residual() const {
  double worst = 0.0;
  for (const auto& [name, value] : residuals) worst = std::max(worst, value);
  return worst;
}

AuxiliaryQuantities compute_auxiliaries(const StateSpaceModel& full, const StateSpaceModel& reduced,
                                        const TimeInterval& interval) {
  check_preconditions(full, reduced, interval);
  require_zero_start(interval);
  const RelErrorSystem sys = build_relerr(full, reduced, interval);
  const Matrix& A = full.A;
  const Matrix& B = full.B;
  const Matrix& C = full.C;
  const Matrix& Ah = reduced.A;
  const Matrix& Bh = reduced.B;
  const Matrix& Ch = reduced.C;

  AuxiliaryQuantities q;
  q.t_d = interval.t2;
  q.A_i = sys.weight.A;
  q.B_i = sys.weight.B;
  q.C_i = sys.weight.C;
  q.D_i = sys.weight.D;
  const EndpointData& end = sys.endpoints.back();
  q.exp_full = end.exp_full;
  q.exp_rom = end.exp_rom;
  q.exp_inv = end.exp_weight;
  q.E1 = end.E1;
  q.E2 = end.E2;

  const Matrix& Ai = q.A_i;
  const Matrix& Bi = q.B_i;
  const Matrix& Ci = q.C_i;
  const Matrix& Di = q.D_i;
  const Matrix AT = A.transpose(), AhT = Ah.transpose(), AiT = Ai.transpose();
  const Matrix CiCi = Ci.transpose() * Ci;

  const auto record = [&q](const char* name, const Matrix& K, const Matrix& L, const Matrix& W, const Matrix& J) {
    q.residuals.emplace_back(name, sylvester_residual(K, L, W, J));
  };
  const auto solve = [&](const char* name, const Matrix& K, const Matrix& L, const Matrix& W) {
    Matrix J = solve_sylvester(K, L, W);
    record(name, K, L, W, J);
    return J;
  };

  q.X11 = solve("X11", A, AT, B * B.transpose());
  q.X12 = solve("X12", A, AhT, B * Bh.transpose());
  q.X13 = solve("X13", A, AiT, q.X11 * C.transpose() * Bi.transpose() - q.X12 * Ch.transpose() * Bi.transpose());
  q.X22 = solve("X22", Ah, AhT, Bh * Bh.transpose());
  q.X23 = solve("X23", Ah, AiT,
                q.X12.transpose() * C.transpose() * Bi.transpose() - q.X22 * Ch.transpose() * Bi.transpose());
  q.X33 = solve("X33", Ai, AiT,
                Bi * C * q.X13 - Bi * Ch * q.X23 + q.X13.transpose() * C.transpose() * Bi.transpose() -
                    q.X23.transpose() * Ch.transpose() * Bi.transpose());

  q.Y33 = solve("Y33", AiT, Ai, CiCi);
  q.Y13 = solve("Y13", AT, Ai, C.transpose() * Bi.transpose() * q.Y33 + C.transpose() * Di.transpose() * Ci);
  q.Y23 = solve("Y23", AhT, Ai, -Ch.transpose() * Bi.transpose() * q.Y33 - Ch.transpose() * Di.transpose() * Ci);

  const Matrix& eA = q.exp_full;
  const Matrix& eAh = q.exp_rom;
  const Matrix& eAi = q.exp_inv;
  const Matrix minus_AT = -AT;
  q.O1 = -CiCi * q.E1 * q.X11 - CiCi * q.E2 * q.X12.transpose() - Ci.transpose() * Di * C * eA * q.X11 +
         Ci.transpose() * Di * Ch * eAh * q.X12.transpose();
  q.xi1 = solve("xi1", AiT, minus_AT, q.O1);
  q.O2 = -CiCi * eAi * q.X13.transpose() - Ci.transpose() * Di * C * eA * q.X11 - CiCi * q.E1 * q.X11 +
         Ci.transpose() * Di * Ch * eAh * q.X12.transpose() - 2.0 * CiCi * q.E2 * q.X12.transpose();
  q.xi2 = solve("xi2", AiT, minus_AT, q.O2);
  const Matrix BBt = B * B.transpose();
  q.O3 = q.Y13.transpose() * eA * BBt - q.Y23.transpose() * eAh * Bh * B.transpose() - q.Y33 * q.E1 * BBt -
         q.Y33 * q.E2 * Bh * B.transpose();
  q.xi3 = solve("xi3", AiT, minus_AT, Matrix(-q.O3));
  return q;
}

JGradient gradient_J(const StateSpaceModel& full, const StateSpaceModel& reduced, const TimeInterval& interval,
                     GradientRoute route) {
  check_preconditions(full, reduced, interval);
  return exact_gradient(make_cascade(full, reduced, interval), route);
}

JGradient finite_difference_gradient(const StateSpaceModel& full, const StateSpaceModel& reduced,
                                     const TimeInterval& interval, double step) {
  check_preconditions(full, reduced, interval);
  if (!(step > 0.0)) throw Error(ErrorKind::kInvalidArgument, "finite-difference step must be positive");
  const WorkspacePtr ws = make_workspace(full, interval);

  JGradient out{Matrix::Zero(reduced.A.rows(), reduced.A.cols()), Matrix::Zero(reduced.B.rows(), reduced.B.cols()),
                Matrix::Zero(reduced.C.rows(), reduced.C.cols())};
  struct Entry {
    int block;
    Index i, j;
  };
  std::vector<Entry> entries;
  for (int block = 0; block < 3; ++block) {
    const Matrix& M = block == 0 ? out.dA : block == 1 ? out.dB : out.dC;
    for (Index j = 0; j < M.cols(); ++j)
      for (Index i = 0; i < M.rows(); ++i) entries.push_back({block, i, j});
  }
  std::vector<double> slopes(entries.size());
  const auto slope = [&](const Entry& e) {
    const auto cost = [&](double delta) {
      StateSpaceModel m = reduced;
      Matrix& M = e.block == 0 ? m.A : e.block == 1 ? m.B : m.C;
      M(e.i, e.j) += delta;
      return relative_cost(ws, m);
    };
    return (cost(step) - cost(-step)) / (2.0 * step);
  };

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < entries.size(); k = next++) slopes[k] = slope(entries[k]);
  };
  const std::size_t threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(entries.size(), 1));
  std::vector<std::future<void>> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();

  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Entry& e = entries[k];
    Matrix& M = e.block == 0 ? out.dA : e.block == 1 ? out.dB : out.dC;
    M(e.i, e.j) = slopes[k];
  }
  return out;
}

OptimalityResidual optimality_residual(const StateSpaceModel& full, const StateSpaceModel& reduced,
                                       const TimeInterval& interval) {
  return halve(gradient_J(full, reduced, interval));
}

OptimalityResidual printed_optimality_residual(const StateSpaceModel& full, const StateSpaceModel& reduced,
                                               const TimeInterval& interval) {
  const AuxiliaryQuantities q = compute_auxiliaries(full, reduced, interval);
  const RelGramianBlocks g = relerr_gramian_blocks(build_relerr(full, reduced, interval));
  const Matrix& B = full.B;
  const Matrix& C = full.C;
  const Matrix& Bh = reduced.B;
  const Matrix& Ch = reduced.C;
  const Matrix& Bi = q.B_i;
  const Matrix& Ci = q.C_i;
  const Matrix& Di = q.D_i;
  const Matrix& E1 = q.E1;
  const Matrix& E2 = q.E2;
  const Matrix& eA = q.exp_full;
  const Matrix& eAh = q.exp_rom;
  const Matrix& eAi = q.exp_inv;
  const Matrix eAiT = eAi.transpose();
  const double t = q.t_d;
  const Matrix CiCi = Ci.transpose() * Ci;
  const Matrix CiDiC = Ci.transpose() * Di * C;
  const Matrix Q13T = g.Q13.transpose();

  const Matrix zeta1 = Q13T * q.X13 + 2.0 * g.Q23 * q.X23 + g.Q23 * q.X23.transpose() + g.Q33 * q.X33 +
                       t * eAiT * CiDiC * eA * q.X12 + t * eAiT * CiCi * E1 * q.X12 -
                       t * eAiT * CiDiC * eA * q.X13 - t * eAiT * CiCi * E1 * q.X13 -
                       t * eAiT * CiCi * eAi * q.X22 + t * eAiT * CiCi * eAi * q.X23.transpose() +
                       t * eAiT * CiCi * eAi * q.X23 - t * eAiT * CiCi * eAi * q.X33 + q.xi1 * E1.transpose() -
                       2.0 * t * eAiT * q.xi1 * C.transpose() * Bi.transpose();

  const Matrix CtDit = C.transpose() * Di.transpose();
  const Matrix Cit = Ci.transpose();
  const Matrix zeta2 =
      -2.0 * Q13T * q.X11 * CtDit + g.Q23 * q.X22 * Cit - g.Q23 * q.X12.transpose() * CtDit + Q13T * q.X12 * Cit -
      g.Q33 * q.X13.transpose() * CtDit - Q13T * q.X13 * Cit - g.Q23 * q.X23 * Cit + g.Q33 * q.X23.transpose() * Cit -
      g.Q33 * q.X33 * Cit - t * eAiT * CiDiC * eA * q.X12 * Cit - t * eAiT * CiCi * E1 * q.X12 * Cit +
      t * eAiT * CiDiC * eA * q.X13 * Cit + t * eAiT * CiCi * E1 * q.X13 * Cit + t * eAiT * CiCi * eAi * q.X22 * Cit -
      t * eAiT * CiCi * eAi * q.X23 * Cit - t * eAiT * CiCi * eAi * q.X23.transpose() * Cit +
      t * eAiT * CiCi * eAi * q.X33 * Cit - q.xi2 * E1.transpose() * Cit - q.xi2 * eA.transpose() * CtDit +
      eAiT * q.xi2 * CtDit + t * eAiT * q.xi2 * C.transpose() * Bi.transpose() * Cit;

  const Matrix BiT = Bi.transpose();
  const Matrix DitDi = Di.transpose() * Di;
  // The printed ξ3·Ĉᵀ·B_iᵀ term does not conform (ξ3 is r x n); ξ3·Cᵀ·B_iᵀ is the
  // only product of that shape that does.
  const Matrix zeta3 = DitDi * C * g.P13 - DitDi * Ch * g.P23 - Di.transpose() * Ci * g.P23.transpose() +
                       Di.transpose() * Ci * g.P33 + BiT * q.Y13.transpose() * g.P13 +
                       2.0 * BiT * q.Y13.transpose() * g.P12 + BiT * q.Y23 * g.P23 - BiT * q.Y23 * g.P22 -
                       BiT * q.Y33 * g.P23.transpose() + t * BiT * eAiT * q.Y13.transpose() * eA * B * Bh.transpose() +
                       t * BiT * eAiT * q.Y23 * eAh * Bh * Bh.transpose() +
                       t * BiT * eAiT * q.Y33 * E2 * Bh * Bh.transpose() +
                       t * BiT * eAiT * q.Y33 * E1 * B * Bh.transpose() -
                       t * BiT * eAiT * q.xi3 * C.transpose() * BiT + BiT * q.xi3 * E1.transpose();

  OptimalityResidual out;
  out.G_A = g.Q12.transpose() * q.X12 + g.Q22 * q.X22 + zeta1;
  out.G_B = g.Q12.transpose() * B + g.Q22 * Bh + zeta2;
  out.G_C = -DitDi * C * g.P12 + DitDi * Ch * g.P22 + zeta3;
  out.norm_A = out.G_A.norm();
  out.norm_B = out.G_B.norm();
  out.norm_C = out.G_C.norm();
  return out;
}

StationarityDeviation stationarity_deviation(const StateSpaceModel& full, const StateSpaceModel& reduced,
                                             const TimeInterval& interval) {
  check_preconditions(full, reduced, interval);
  const OptimalityResidual res = halve(exact_gradient(make_cascade(full, reduced, interval), GradientRoute::kObservability));
  const RelErrorSystem sys = build_relerr(full, reduced, interval);
  const RelGramianBlocks g = relerr_gramian_blocks(sys);
  const Matrix& Di = sys.weight.D;
  const Matrix DitDi = Di.transpose() * Di;

  StationarityDeviation out;
  out.xi1_bar = res.G_A - (g.Q12.transpose() * g.P12 + g.Q22 * g.P22);
  out.xi2 = res.G_B - (g.Q12.transpose() * full.B + g.Q22 * reduced.B);
  out.xi3 = res.G_C - (-DitDi * full.C * g.P12 + DitDi * reduced.C * g.P22);
  out.norm_xi1_bar = out.xi1_bar.norm();
  out.norm_xi2 = out.xi2.norm();
  out.norm_xi3 = out.xi3.norm();
  const Index r = reduced.states();
  if (numerical_rank(g.P22) < r) out.diagnostics.push_back("P22 is singular; the projection P12·P22⁻¹ is undefined");
  if (numerical_rank(g.Q22) < r) out.diagnostics.push_back("Q22 is singular; the projection −Q12·Q22⁻¹ is undefined");
  return out;
}

}  // namespace tlmor
