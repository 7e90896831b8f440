// SPDX-License-Identifier: Apache-2.0
#include "tlmor/relerr_system.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "tlmor/error.hpp"
#include "tlmor/spectral_factor.hpp"

namespace tlmor {

namespace {

double relative_gap(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

void check_compatible(const StateSpaceModel& full, const StateSpaceModel& reduced) {
  if (full.inputs() != reduced.inputs() || full.outputs() != reduced.outputs()) {
    std::ostringstream os;
    os << "full model is " << full.outputs() << "x" << full.inputs() << ", reduced model is "
       << reduced.outputs() << "x" << reduced.inputs();
    throw Error(ErrorKind::kDimensionMismatch, os.str());
  }
}

void check_feedthrough_match(const StateSpaceModel& full, const StateSpaceModel& reduced) {
  if ((full.D - reduced.D).norm() > 1e-12 * std::max(1.0, full.D.norm())) {
    throw Error(ErrorKind::kInvalidArgument,
                "reduced model must carry the full model's D; a feedthrough mismatch has unbounded H2 norm");
  }
}

// Coupling F = [F1 F2] = B3·[C, −Ĉ] and output blocks G = [G1 G2 G3] = [D3·C, −D3·Ĉ, C3].
struct Coupling {
  Matrix F1, F2, G1, G2, G3;
};

Coupling coupling(const RelErrorSystem& sys) {
  const auto& full = sys.full();
  const auto& w = sys.weight;
  return {w.B * full.C, -w.B * sys.rom.C, w.D * full.C, -w.D * sys.rom.C, w.C};
}

// Lower-left block of exp([[X, 0], [F, Y]]·t).
Matrix coupling_block(const Matrix& X, const Matrix& F, const Matrix& Y, double t) {
  const Index nx = X.rows(), ny = Y.rows();
  Matrix M = Matrix::Zero(nx + ny, nx + ny);
  M.topLeftCorner(nx, nx) = X;
  M.bottomLeftCorner(ny, nx) = F;
  M.bottomRightCorner(ny, ny) = Y;
  return matrix_exponential(M, t).bottomLeftCorner(ny, nx);
}

EndpointData make_endpoint(const RelErrorSystem& sys, double t, double sign, const Matrix& exp_full) {
  EndpointData e;
  e.t = t;
  e.sign = sign;
  e.exp_full = exp_full;
  const Index q = sys.weight.states();
  if (t == 0.0) {
    e.exp_rom = Matrix::Identity(sys.rom.states(), sys.rom.states());
    e.exp_weight = Matrix::Identity(q, q);
    e.E1 = Matrix::Zero(q, sys.full().states());
    e.E2 = Matrix::Zero(q, sys.rom.states());
    return e;
  }
  e.exp_rom = matrix_exponential(sys.rom.A, t);
  e.exp_weight = matrix_exponential(sys.weight.A, t);
  const Matrix& B3 = sys.weight.B;
  const Matrix& C = sys.full().C;
  const Matrix& Cr = sys.rom.C;
  // A3 E1 − E1 A + B3 C e^{At} − e^{A3 t} B3 C = 0
  const Matrix w1 = B3 * (C * exp_full) - e.exp_weight * (B3 * C);
  // A3 E2 − E2 Â − B3 Ĉ e^{Ât} + e^{A3 t} B3 Ĉ = 0
  const Matrix w2 = -B3 * (Cr * e.exp_rom) + e.exp_weight * (B3 * Cr);
  try {
    e.E1 = solve_sylvester(op(sys.weight_schur), -op(sys.workspace->schur()), w1);
    e.E2 = solve_sylvester(op(sys.weight_schur), -op(sys.rom_schur), w2);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::kSpectrumConflict) throw;
    // Shared eigenvalues make the Sylvester operators singular, but the
    // coupling is still the lower-left block of a block-triangular exponential.
    e.E1 = coupling_block(sys.full().A, B3 * C, sys.weight.A, t);
    e.E2 = coupling_block(sys.rom.A, -B3 * Cr, sys.weight.A, t);
    e.coupling_from_exponential = true;
  }
  return e;
}

struct ControlTerms {
  Matrix N11, N12, N13, N22, N23, N33;
};

// Σ s_k U_i(t_k) U_j(t_k)ᵀ with U = e^{A_rel t} B_rel split by block rows.
ControlTerms control_terms(const RelErrorSystem& sys, const std::vector<EndpointData>& ends) {
  const Index n = sys.full().states(), r = sys.rom.states(), q = sys.weight.states();
  ControlTerms out{Matrix::Zero(n, n), Matrix::Zero(n, r), Matrix::Zero(n, q),
                   Matrix::Zero(r, r), Matrix::Zero(r, q), Matrix::Zero(q, q)};
  for (const auto& e : ends) {
    const Matrix u1 = e.exp_full * sys.full().B;
    const Matrix u2 = e.exp_rom * sys.rom.B;
    const Matrix u3 = e.E1 * sys.full().B + e.E2 * sys.rom.B;
    out.N11 += e.sign * u1 * u1.transpose();
    out.N12 += e.sign * u1 * u2.transpose();
    out.N13 += e.sign * u1 * u3.transpose();
    out.N22 += e.sign * u2 * u2.transpose();
    out.N23 += e.sign * u2 * u3.transpose();
    out.N33 += e.sign * u3 * u3.transpose();
  }
  return out;
}

// Σ s_k M_i(t_k)ᵀ M_j(t_k) with M = C_rel e^{A_rel t} split by block columns.
ControlTerms observe_terms(const RelErrorSystem& sys, const Coupling& cp, const std::vector<EndpointData>& ends) {
  const Index n = sys.full().states(), r = sys.rom.states(), q = sys.weight.states();
  ControlTerms out{Matrix::Zero(n, n), Matrix::Zero(n, r), Matrix::Zero(n, q),
                   Matrix::Zero(r, r), Matrix::Zero(r, q), Matrix::Zero(q, q)};
  for (const auto& e : ends) {
    const Matrix m1 = cp.G1 * e.exp_full + cp.G3 * e.E1;
    const Matrix m2 = cp.G2 * e.exp_rom + cp.G3 * e.E2;
    const Matrix m3 = cp.G3 * e.exp_weight;
    out.N11 += e.sign * m1.transpose() * m1;
    out.N12 += e.sign * m1.transpose() * m2;
    out.N13 += e.sign * m1.transpose() * m3;
    out.N22 += e.sign * m2.transpose() * m2;
    out.N23 += e.sign * m2.transpose() * m3;
    out.N33 += e.sign * m3.transpose() * m3;
  }
  return out;
}

Matrix sym(const Matrix& M) { return 0.5 * (M + M.transpose()); }

RelGramianBlocks solve_blocks(const RelErrorSystem& sys, const std::vector<EndpointData>& ends,
                              const Matrix* p11, BlockSet set) {
  const Coupling cp = coupling(sys);
  const auto S_full = op(sys.workspace->schur());
  const auto S_rom = op(sys.rom_schur);
  const auto S_w = op(sys.weight_schur);
  RelGramianBlocks b;

  const ControlTerms nq = observe_terms(sys, cp, ends);
  b.L33 = nq.N33;
  b.Q33 = solve_lyapunov(S_w.t(), b.L33);
  b.L13 = cp.F1.transpose() * b.Q33 + nq.N13;
  b.Q13 = solve_sylvester(S_full.t(), S_w, b.L13);
  b.L23 = cp.F2.transpose() * b.Q33 + nq.N23;
  b.Q23 = solve_sylvester(S_rom.t(), S_w, b.L23);
  b.L12 = cp.F1.transpose() * b.Q23.transpose() + b.Q13 * cp.F2 + nq.N12;
  b.Q12 = solve_sylvester(S_full.t(), S_rom, b.L12);
  if (set == BlockSet::kObservabilityCoupling) return b;

  b.L22 = sym(cp.F2.transpose() * b.Q23.transpose() + b.Q23 * cp.F2 + nq.N22);
  b.Q22 = solve_lyapunov(S_rom.t(), b.L22);
  b.L11 = sym(cp.F1.transpose() * b.Q13.transpose() + b.Q13 * cp.F1 + nq.N11);
  b.Q11 = solve_lyapunov(S_full.t(), b.L11);

  const ControlTerms np = control_terms(sys, ends);
  b.P11 = *p11;
  b.P12 = solve_sylvester(S_full, S_rom.t(), np.N12);
  b.K22 = np.N22;
  b.P22 = solve_lyapunov(S_rom, b.K22);
  b.K13 = b.P11 * cp.F1.transpose() + b.P12 * cp.F2.transpose() + np.N13;
  b.P13 = solve_sylvester(S_full, S_w.t(), b.K13);
  b.K23 = b.P12.transpose() * cp.F1.transpose() + b.P22 * cp.F2.transpose() + np.N23;
  b.P23 = solve_sylvester(S_rom, S_w.t(), b.K23);
  b.K33 = sym(cp.F1 * b.P13 + cp.F2 * b.P23 + b.P13.transpose() * cp.F1.transpose() +
              b.P23.transpose() * cp.F2.transpose() + np.N33);
  b.P33 = solve_lyapunov(S_w, b.K33);

  if (sys.kind == WeightKind::kInverse) {
    b.block_identity_deviation = std::max({relative_gap(b.Q12, -b.Q13), relative_gap(b.Q22, -b.Q23),
                                  relative_gap(b.Q22, b.Q33)});
  }
  return b;
}

std::vector<EndpointData> infinite_endpoints(const RelErrorSystem& sys) {
  EndpointData e;
  e.t = 0.0;
  e.sign = 1.0;
  const Index n = sys.full().states(), r = sys.rom.states(), q = sys.weight.states();
  e.exp_full = Matrix::Identity(n, n);
  e.exp_rom = Matrix::Identity(r, r);
  e.exp_weight = Matrix::Identity(q, q);
  e.E1 = Matrix::Zero(q, n);
  e.E2 = Matrix::Zero(q, r);
  return {e};
}

StateSpaceModel weight_for(const StateSpaceModel& reduced, const RelativeErrorOptions& options, bool& regularized,
                           WeightKind& used) {
  Matrix d = reduced.D;
  regularized = false;
  if (options.regularize) {
    d = epsilon_regularize(reduced.D, options.epsilon);
    regularized = !(d.array() == reduced.D.array()).all();
  }
  const StateSpaceModel shifted = reduced.with_feedthrough(d);
  used = options.weight;
  if (options.weight == WeightKind::kInverse) {
    StateSpaceModel inv = inverse_realization(shifted);
    if (!options.stable_fallback || inv.states() == 0 || is_hurwitz(inv.A)) return inv;
    used = WeightKind::kSpectralFactor;
  }
  return build_spectral_factor_inverse(shifted).as_model();
}

// Near the roundoff floor of the trace forms the square root reports
// O(sqrt(eps)) noise; the factored form resolves errors down to O(eps).
constexpr double kCancellationFloor = 1e3 * std::numeric_limits<double>::epsilon();

// ‖C U‖_F² for U U* = X solving T X + X T* + G G* = 0, T upper triangular and
// stable. U is built column by column from the bottom (Hammarling) and never
// stored; every contribution is a sum of squares, so a tiny result keeps its
// relative accuracy where trace(C X C*) would drown in roundoff.
double factored_energy(const ComplexMatrix& T, ComplexMatrix G, const ComplexMatrix& C) {
  double energy = 0.0;
  for (Index k = T.rows() - 1; k >= 0; --k) {
    const Eigen::RowVectorXcd g = G.row(k);
    const std::complex<double> lambda = T(k, k);
    const double nu = g.norm() / std::sqrt(-2.0 * lambda.real());
    if (nu == 0.0) continue;
    Eigen::VectorXcd u(k);
    if (k > 0) {
      ComplexMatrix shifted = T.topLeftCorner(k, k);
      shifted.diagonal().array() += std::conj(lambda);
      const Eigen::VectorXcd rhs = -T.col(k).head(k) * nu - G.topRows(k) * g.adjoint() / nu;
      u = shifted.triangularView<Eigen::Upper>().solve(rhs);
      G.topRows(k) -= u * g / nu;
    }
    energy += (C.leftCols(k) * u + C.col(k) * nu).squaredNorm();
  }
  return energy;
}

// Squared time-limited norm of H − Ĥ from factored gramians of the error
// system: e^{A_e t1}-tail energy minus e^{A_e t2}-tail energy.
double factored_additive_error(const StateSpaceModel& H, const Matrix& e1, const Matrix& e2,
                               const StateSpaceModel& reduced, const Matrix& er1, const Matrix& er2) {
  const Index n = H.states(), r = reduced.states();
  const Eigen::ComplexSchur<Matrix> full_schur(H.A), reduced_schur(reduced.A);
  ComplexMatrix T = ComplexMatrix::Zero(n + r, n + r);
  T.topLeftCorner(n, n) = full_schur.matrixT();
  T.bottomRightCorner(r, r) = reduced_schur.matrixT();
  const ComplexMatrix& Zf = full_schur.matrixU();
  const ComplexMatrix& Zr = reduced_schur.matrixU();
  ComplexMatrix CZ(H.outputs(), n + r);
  CZ << H.C * Zf, -reduced.C * Zr;
  const auto input = [&](const Matrix& ef, const Matrix& er) {
    ComplexMatrix G(n + r, H.inputs());
    G << Zf.adjoint() * (ef * H.B), Zr.adjoint() * (er * reduced.B);
    return G;
  };
  return factored_energy(T, input(e1, er1), CZ) - factored_energy(T, input(e2, er2), CZ);
}

// Same for W·(H − Ĥ). Ordering the states as (weight, reduced, full) makes
// A_rel block upper triangular, so the block Schur factors combine into one
// triangular T.
double factored_relative_error(const RelErrorSystem& sys) {
  const auto& H = sys.full();
  const auto& W = sys.weight;
  const Index n = H.states(), r = sys.rom.states(), q = W.states();
  const Eigen::ComplexSchur<Matrix> full_schur(H.A), reduced_schur(sys.rom.A), weight_schur(W.A);
  const ComplexMatrix& Zf = full_schur.matrixU();
  const ComplexMatrix& Zr = reduced_schur.matrixU();
  const ComplexMatrix& Zw = weight_schur.matrixU();
  ComplexMatrix T = ComplexMatrix::Zero(q + r + n, q + r + n);
  T.topLeftCorner(q, q) = weight_schur.matrixT();
  T.block(0, q, q, r) = Zw.adjoint() * (-W.B * sys.rom.C) * Zr;
  T.block(0, q + r, q, n) = Zw.adjoint() * (W.B * H.C) * Zf;
  T.block(q, q, r, r) = reduced_schur.matrixT();
  T.bottomRightCorner(n, n) = full_schur.matrixT();
  ComplexMatrix CZ(W.outputs(), q + r + n);
  CZ << W.C * Zw, -W.D * sys.rom.C * Zr, W.D * H.C * Zf;
  double energy = 0.0;
  for (const EndpointData& e : sys.endpoints) {
    ComplexMatrix G(q + r + n, H.inputs());
    G << Zw.adjoint() * (e.E1 * H.B + e.E2 * sys.rom.B), Zr.adjoint() * (e.exp_rom * sys.rom.B),
        Zf.adjoint() * (e.exp_full * H.B);
    energy += e.sign * factored_energy(T, G, CZ);
  }
  return energy;
}

}  // namespace

bool RelErrorSystem::weight_is_stable() const {
  return weight.states() == 0 || spectral_abscissa(weight.A) < 0.0;
}

StateSpaceModel RelErrorSystem::assembled() const {
  const auto& H = full();
  const Index n = H.states(), r = rom.states(), q = weight.states();
  const Index N = n + r + q;
  Matrix A = Matrix::Zero(N, N);
  A.block(0, 0, n, n) = H.A;
  A.block(n, n, r, r) = rom.A;
  A.block(n + r, 0, q, n) = weight.B * H.C;
  A.block(n + r, n, q, r) = -weight.B * rom.C;
  A.block(n + r, n + r, q, q) = weight.A;
  Matrix B = Matrix::Zero(N, H.inputs());
  B.topRows(n) = H.B;
  B.middleRows(n, r) = rom.B;
  Matrix C(weight.outputs(), N);
  C << weight.D * H.C, -weight.D * rom.C, weight.C;
  return {A, B, C, Matrix::Zero(weight.outputs(), H.inputs())};
}

RelErrorSystem build_relerr(WorkspacePtr workspace, const StateSpaceModel& reduced, const StateSpaceModel& weight,
                            WeightKind kind) {
  if (!workspace) throw Error(ErrorKind::kInvalidArgument, "missing full-order workspace");
  check_compatible(workspace->model(), reduced);
  if (weight.inputs() != reduced.outputs()) {
    throw Error(ErrorKind::kDimensionMismatch, "weight input count must equal the model output count");
  }
  RelErrorSystem sys;
  sys.workspace = std::move(workspace);
  sys.rom = reduced;
  sys.weight = weight;
  sys.kind = kind;
  sys.rom_schur = real_schur(reduced.A);
  sys.weight_schur = real_schur(weight.A);
  const auto& iv = sys.interval();
  sys.endpoints.push_back(make_endpoint(sys, iv.t1, 1.0, sys.workspace->exp_t1()));
  sys.endpoints.push_back(make_endpoint(sys, iv.t2, -1.0, sys.workspace->exp_t2()));

  if (kind == WeightKind::kInverse && iv.t2 > 0.0) {
    const Matrix closed = sys.endpoints.back().exp_rom - sys.endpoints.back().exp_weight;
    sys.e2_closed_form_deviation = relative_gap(sys.E2(), closed);
    if (sys.e2_closed_form_deviation > 1e-8) {
      std::ostringstream os;
      os << "E2 deviates from e^{Ât} − e^{A_i t} by " << sys.e2_closed_form_deviation << " (relative)";
      sys.diagnostics.push_back(os.str());
    }
  }
  for (const EndpointData& e : sys.endpoints) {
    if (e.coupling_from_exponential) {
      sys.diagnostics.push_back("weight and model share eigenvalues; coupling taken from the block exponential");
    }
  }
  if (!sys.weight_is_stable()) sys.diagnostics.push_back("weight system is unstable");
  if (reduced.states() > 0 && spectral_abscissa(reduced.A) >= 0.0) sys.diagnostics.push_back("reduced model is unstable");
  return sys;
}

RelErrorSystem build_relerr(const StateSpaceModel& full, const StateSpaceModel& reduced, const TimeInterval& interval) {
  check_compatible(full, reduced);
  if (!reduced.is_square()) throw Error(ErrorKind::kInversion, "relative error needs a square reduced model");
  check_feedthrough_match(full, reduced);
  if (reduced.states() > 0 && !is_hurwitz(reduced.A)) {
    throw Error(ErrorKind::kUnsupportedModel, "reduced model must be stable");
  }
  return build_relerr(make_workspace(full, interval), reduced, inverse_realization(reduced), WeightKind::kInverse);
}

Matrix RelGramianBlocks::assembled_P() const {
  const Index n = P11.rows(), r = P22.rows(), q = P33.rows();
  Matrix P(n + r + q, n + r + q);
  P << P11, P12, P13, P12.transpose(), P22, P23, P13.transpose(), P23.transpose(), P33;
  return P;
}

Matrix RelGramianBlocks::assembled_Q() const {
  const Index n = Q11.rows(), r = Q22.rows(), q = Q33.rows();
  Matrix Q(n + r + q, n + r + q);
  Q << Q11, Q12, Q13, Q12.transpose(), Q22, Q23, Q13.transpose(), Q23.transpose(), Q33;
  return Q;
}

RelGramianBlocks relerr_gramian_blocks(const RelErrorSystem& sys, BlockSet set) {
  const Matrix* p11 = set == BlockSet::kAll ? &sys.workspace->controllability() : nullptr;
  return solve_blocks(sys, sys.endpoints, p11, set);
}

RelGramianBlocks relerr_infinite_blocks(const RelErrorSystem& sys) {
  return solve_blocks(sys, infinite_endpoints(sys), &sys.workspace->infinite_controllability(), BlockSet::kAll);
}

ErrorEvaluation evaluate_relative_error(const RelErrorSystem& sys) {
  const RelGramianBlocks b = relerr_gramian_blocks(sys);
  const Coupling cp = coupling(sys);
  const auto& H = sys.full();
  const double t11 = (cp.G1 * b.P11 * cp.G1.transpose()).trace();
  const double t22 = (cp.G2 * b.P22 * cp.G2.transpose()).trace();
  const double t33 = (cp.G3 * b.P33 * cp.G3.transpose()).trace();
  const double t12 = (cp.G1 * b.P12 * cp.G2.transpose()).trace();
  const double t13 = (cp.G1 * b.P13 * cp.G3.transpose()).trace();
  const double t23 = (cp.G2 * b.P23 * cp.G3.transpose()).trace();
  const double s11 = (H.B.transpose() * b.Q11 * H.B).trace();
  const double s12 = (H.B.transpose() * b.Q12 * sys.rom.B).trace();
  const double s22 = (sys.rom.B.transpose() * b.Q22 * sys.rom.B).trace();

  ErrorEvaluation out;
  out.p_form = t11 + t22 + t33 + 2.0 * (t12 + t13 + t23);
  out.q_form = s11 + 2.0 * s12 + s22;
  const double magnitude = std::abs(t11) + std::abs(t22) + std::abs(t33) +
                           2.0 * (std::abs(t12) + std::abs(t13) + std::abs(t23)) + std::abs(s11) +
                           2.0 * std::abs(s12) + std::abs(s22);
  const double gap = std::abs(out.p_form - out.q_form);
  out.forms_agree = gap <= 1e-7 * std::max(std::abs(out.p_form), std::abs(out.q_form)) + 1e-13 * magnitude;
  out.value = std::sqrt(std::max(0.0, out.p_form));
  out.weight_stable = sys.weight_is_stable();
  out.diagnostics = sys.diagnostics;
  const bool rom_stable = sys.rom.states() == 0 || spectral_abscissa(sys.rom.A) < 0.0;
  if (out.weight_stable && rom_stable && out.p_form <= kCancellationFloor * magnitude) {
    out.value = std::sqrt(std::max(0.0, factored_relative_error(sys)));
    out.diagnostics.push_back("trace forms at cancellation floor; factored gramians used");
  }
  if (!out.forms_agree) {
    std::ostringstream os;
    os << "P-form " << out.p_form << " and Q-form " << out.q_form << " disagree";
    out.diagnostics.push_back(os.str());
  }
  if (sys.kind == WeightKind::kInverse && b.block_identity_deviation > 1e-9) {
    std::ostringstream os;
    os << "observability block identities violated by " << b.block_identity_deviation << " (relative)";
    out.diagnostics.push_back(os.str());
  }
  return out;
}

ErrorEvaluation evaluate_relative_error(WorkspacePtr workspace, const StateSpaceModel& reduced,
                                        const RelativeErrorOptions& options) {
  check_compatible(workspace->model(), reduced);
  if (!reduced.is_square()) throw Error(ErrorKind::kInversion, "relative error needs a square reduced model");
  check_feedthrough_match(workspace->model(), reduced);
  bool regularized = false;
  WeightKind used = options.weight;
  const StateSpaceModel weight = weight_for(reduced, options, regularized, used);
  const RelErrorSystem sys = build_relerr(std::move(workspace), reduced, weight, used);
  ErrorEvaluation out = evaluate_relative_error(sys);
  out.regularized = regularized;
  out.weight_used = used;
  if (regularized) out.diagnostics.push_back("rank-deficient D replaced by epsilon*I in the weight");
  if (used != options.weight) out.diagnostics.push_back("inverse weight unstable; spectral-factor weight used");
  return out;
}

double h2tau_relative_error(const StateSpaceModel& full, const StateSpaceModel& reduced, const TimeInterval& interval,
                            const RelativeErrorOptions& options) {
  if (reduced.states() > 0 && !is_hurwitz(reduced.A)) {
    throw Error(ErrorKind::kUnsupportedModel, "reduced model must be stable");
  }
  return evaluate_relative_error(make_workspace(full, interval), reduced, options).value;
}

ErrorEvaluation evaluate_additive_error(WorkspacePtr workspace, const StateSpaceModel& reduced) {
  const auto& H = workspace->model();
  check_compatible(H, reduced);
  const auto& iv = workspace->interval();
  const RealSchurForm rs = real_schur(reduced.A);
  const Matrix er1 = matrix_exponential(reduced.A, iv.t1);
  const Matrix er2 = matrix_exponential(reduced.A, iv.t2);
  const Matrix& e1 = workspace->exp_t1();
  const Matrix& e2 = workspace->exp_t2();

  const Matrix n12 = (e1 * H.B) * (er1 * reduced.B).transpose() - (e2 * H.B) * (er2 * reduced.B).transpose();
  const Matrix rb1 = er1 * reduced.B, rb2 = er2 * reduced.B;
  const Matrix n22 = rb1 * rb1.transpose() - rb2 * rb2.transpose();
  const Matrix P12 = solve_sylvester(op(workspace->schur()), op(rs).t(), n12);
  const Matrix P22 = solve_lyapunov(op(rs), n22);

  const Matrix m12 = -((H.C * e1).transpose() * (reduced.C * er1) - (H.C * e2).transpose() * (reduced.C * er2));
  const Matrix rc1 = reduced.C * er1, rc2 = reduced.C * er2;
  const Matrix m22 = rc1.transpose() * rc1 - rc2.transpose() * rc2;
  const Matrix Q12 = solve_sylvester(op(workspace->schur()).t(), op(rs), m12);
  const Matrix Q22 = solve_lyapunov(op(rs).t(), m22);

  const double t11 = (H.C * workspace->controllability() * H.C.transpose()).trace();
  const double t12 = (H.C * P12 * reduced.C.transpose()).trace();
  const double t22 = (reduced.C * P22 * reduced.C.transpose()).trace();
  const double s11 = (H.B.transpose() * workspace->observability() * H.B).trace();
  const double s12 = (H.B.transpose() * Q12 * reduced.B).trace();
  const double s22 = (reduced.B.transpose() * Q22 * reduced.B).trace();

  ErrorEvaluation out;
  out.p_form = t11 - 2.0 * t12 + t22;
  out.q_form = s11 + 2.0 * s12 + s22;
  const double magnitude = std::abs(t11) + 2.0 * std::abs(t12) + std::abs(t22) + std::abs(s11) +
                           2.0 * std::abs(s12) + std::abs(s22);
  out.forms_agree = std::abs(out.p_form - out.q_form) <=
                    1e-7 * std::max(std::abs(out.p_form), std::abs(out.q_form)) + 1e-13 * magnitude;
  out.value = std::sqrt(std::max(0.0, out.p_form));
  const bool stable = reduced.states() == 0 || spectral_abscissa(reduced.A) < 0.0;
  if (!stable) out.diagnostics.push_back("reduced model is unstable");
  if (stable && out.p_form <= kCancellationFloor * magnitude) {
    const double refined = factored_additive_error(H, e1, e2, reduced, er1, er2);
    out.value = std::sqrt(std::max(0.0, refined));
    out.diagnostics.push_back("trace forms at cancellation floor; factored gramians used");
  }
  if (!out.forms_agree) {
    std::ostringstream os;
    os << "P-form " << out.p_form << " and Q-form " << out.q_form << " disagree";
    out.diagnostics.push_back(os.str());
  }
  return out;
}

double h2tau_additive_error(const StateSpaceModel& full, const StateSpaceModel& reduced, const TimeInterval& interval) {
  if (reduced.states() > 0 && !is_hurwitz(reduced.A)) {
    throw Error(ErrorKind::kUnsupportedModel, "reduced model must be stable");
  }
  return evaluate_additive_error(make_workspace(full, interval), reduced).value;
}

double relative_cost(WorkspacePtr workspace, const StateSpaceModel& reduced) {
  RelativeErrorOptions options;
  options.regularize = false;
  options.stable_fallback = false;
  return evaluate_relative_error(std::move(workspace), reduced, options).p_form;
}

}  // namespace tlmor
