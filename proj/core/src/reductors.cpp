// SPDX-License-Identifier: Apache-2.0
#include "tlmor/reductors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "tlmor/error.hpp"
#include "tlmor/relerr_system.hpp"
#include "tlmor/spectral_factor.hpp"

namespace tlmor {

namespace {

std::mutex& observer_mutex() {
  static std::mutex m;
  return m;
}

ProjectionObserver& observer_slot() {
  static ProjectionObserver slot;
  return slot;
}

// Restores Wᵀ V = I after roundoff drift, enforces the invariant and reports the pair.
ProjectionPair finalize(ProjectionPair pair, std::string_view origin) {
  if (!pair.V.allFinite() || !pair.W.allFinite()) {
    throw Error(ErrorKind::kBreakdown, std::string(origin) + ": projection has non-finite entries");
  }
  if (pair.biorthogonality_error() > 1e-12) {
    const Matrix cross = pair.V.transpose() * pair.W;
    pair.W = pair.W * cross.inverse();
  }
  const double err = pair.biorthogonality_error();
  if (!(err <= 1e-8)) {
    std::ostringstream os;
    os << origin << ": ||W^T V - I||_F = " << err << " after re-biorthogonalization";
    throw Error(ErrorKind::kBreakdown, os.str());
  }
  ProjectionObserver observer;
  {
    std::lock_guard lock(observer_mutex());
    observer = observer_slot();
  }
  if (observer) observer(pair, origin);
  return pair;
}

// F with F Fᵀ = M for symmetric PSD M; negative roundoff eigenvalues are clipped.
Matrix psd_square_root_factor(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()));
  if (es.info() != Eigen::Success) throw Error(ErrorKind::kNonConvergence, "symmetric eigensolver failed");
  // Eigenvalues at roundoff level would become O(sqrt(eps)) after the root and
  // masquerade as rank; treat them as zero.
  const double floor = static_cast<double>(M.rows()) * std::numeric_limits<double>::epsilon() *
                       es.eigenvalues().cwiseAbs().maxCoeff();
  const Vector root = (es.eigenvalues().array() > floor).select(es.eigenvalues(), 0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

// Singular vectors of a repeated σ are defined only up to a rotation. Within a
// tied cluster of k directions, rotate so that the first one vanishes on the
// last k−1 state indices (lowest-index tie-break). `left` gets the same rotation.
void canonicalize_ties(const Vector& s, Matrix& right, Matrix& left) {
  const Index count = s.size();
  for (Index a = 0; a < count;) {
    Index b = a + 1;
    while (b < count && s(a) - s(b) <= 1e-12 * s(0)) ++b;
    const Index k = b - a;
    if (k > 1) {
      const Matrix flipped = right.middleCols(a, k).colwise().reverse();
      Eigen::HouseholderQR<Matrix> qr(flipped.transpose());
      const Matrix Qk = qr.householderQ();
      const Matrix G = Qk.rowwise().reverse();
      right.middleCols(a, k) = (right.middleCols(a, k) * G).eval();
      left.middleCols(a, k) = (left.middleCols(a, k) * G).eval();
    }
    a = b;
  }
  // Fix the sign of each direction by its largest entry.
  for (Index j = 0; j < right.cols(); ++j) {
    Index row = 0;
    right.col(j).cwiseAbs().maxCoeff(&row);
    if (right(row, j) < 0.0) {
      right.col(j) *= -1.0;
      left.col(j) *= -1.0;
    }
  }
}

Matrix orthonormal_basis(const Matrix& M, const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(M);
  qr.setThreshold(1e-12);
  if (qr.rank() < M.cols()) {
    std::ostringstream os;
    os << what << " has numerical rank " << qr.rank() << " < " << M.cols();
    throw Error(ErrorKind::kRank, os.str());
  }
  Eigen::HouseholderQR<Matrix> hqr(M);
  return hqr.householderQ() * Matrix::Identity(M.rows(), M.cols());
}

std::vector<std::complex<double>> sorted_eigenvalues(const Matrix& A) {
  std::vector<std::complex<double>> out;
  if (A.rows() == 0) return out;
  Eigen::EigenSolver<Matrix> es(A, false);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::kNonConvergence, "eigenvalue iteration failed");
  for (Index i = 0; i < A.rows(); ++i) out.push_back(es.eigenvalues()(i));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

void require_simple_spectrum(const Matrix& A) {
  const auto eig = sorted_eigenvalues(A);
  double scale = 1.0;
  for (const auto& z : eig) scale = std::max(scale, std::abs(z));
  for (std::size_t i = 0; i < eig.size(); ++i) {
    for (std::size_t j = i + 1; j < eig.size(); ++j) {
      if (std::abs(eig[i] - eig[j]) <= 1e-10 * scale) {
        throw Error(ErrorKind::kBreakdown, "reduced state matrix has a (nearly) repeated eigenvalue");
      }
    }
  }
}

WorkspacePtr ensure_workspace(const StateSpaceModel& model, const ReductorConfig& cfg, WorkspacePtr ws) {
  if (ws) {
    const auto& iv = ws->interval();
    if (iv.t1 != cfg.interval.t1 || iv.t2 != cfg.interval.t2 || ws->model().A.rows() != model.A.rows()) {
      throw Error(ErrorKind::kInvalidArgument, "workspace does not match the model and interval");
    }
    return ws;
  }
  return make_workspace(model, cfg.interval);
}

// Time-limited cross gramian pieces shared by the iterative methods:
//   A X + X Âᵀ + Σ_k s_k e^{A t_k} B B̂ᵀ e^{Âᵀ t_k} = 0.
Matrix cross_controllability(const FullOrderWorkspace& ws, const StateSpaceModel& rom, const RealSchurForm& rom_schur) {
  const auto& H = ws.model();
  const auto& iv = ws.interval();
  const Matrix u1 = ws.exp_t1() * H.B, u2 = ws.exp_t2() * H.B;
  const Matrix r1 = matrix_exponential(rom.A, iv.t1) * rom.B, r2 = matrix_exponential(rom.A, iv.t2) * rom.B;
  return solve_sylvester(op(ws.schur()), op(rom_schur).t(), u1 * r1.transpose() - u2 * r2.transpose());
}

//   Aᵀ Y + Y Â − Σ_k s_k (C e^{A t_k})ᵀ Ĉ e^{Â t_k} = 0.
Matrix cross_observability(const FullOrderWorkspace& ws, const StateSpaceModel& rom, const RealSchurForm& rom_schur) {
  const auto& H = ws.model();
  const auto& iv = ws.interval();
  const Matrix c1 = H.C * ws.exp_t1(), c2 = H.C * ws.exp_t2();
  const Matrix r1 = rom.C * matrix_exponential(rom.A, iv.t1), r2 = rom.C * matrix_exponential(rom.A, iv.t2);
  return solve_sylvester(op(ws.schur()).t(), op(rom_schur), -(c1.transpose() * r1 - c2.transpose() * r2));
}

std::uint64_t restart_seed(std::uint64_t seed, int attempt) {
  return seed + 1000003ULL * static_cast<std::uint64_t>(attempt);
}

void flag_stability(ReductionResult& result) {
  if (result.rom.states() > 0 && spectral_abscissa(result.rom.A) >= 0.0) {
    result.diagnostics.push_back("reduced model is unstable");
  }
}

}  // namespace

double ProjectionPair::biorthogonality_error() const {
  return (W.transpose() * V - Matrix::Identity(V.cols(), V.cols())).norm();
}

void set_projection_observer(ProjectionObserver observer) {
  std::lock_guard lock(observer_mutex());
  observer_slot() = std::move(observer);
}

std::string_view to_string(InitStrategy strategy) noexcept {
  return strategy == InitStrategy::kRandomStable ? "random-stable" : "dominant-eigs";
}

InitStrategy parse_init_strategy(std::string_view text) {
  if (text == "random-stable") return InitStrategy::kRandomStable;
  if (text == "dominant-eigs") return InitStrategy::kDominantEigs;
  throw Error(ErrorKind::kInvalidArgument, "unknown initial-guess strategy '" + std::string(text) + "'");
}

void ReductorConfig::validate(Index full_order) const {
  interval.validate();
  if (order < 1 || order > full_order) {
    std::ostringstream os;
    os << "reduced order " << order << " must lie in [1, " << full_order << "]";
    throw Error(ErrorKind::kInvalidArgument, os.str());
  }
  if (!(epsilon > 0.0)) throw Error(ErrorKind::kInvalidArgument, "epsilon must be positive");
  if (max_iter < 1) throw Error(ErrorKind::kInvalidArgument, "max_iter must be at least 1");
  if (!(conv_tol > 0.0)) throw Error(ErrorKind::kInvalidArgument, "conv_tol must be positive");
  if (restarts < 0) throw Error(ErrorKind::kInvalidArgument, "restart budget must be non-negative");
  if (initial_rom && initial_rom->states() != order) {
    throw Error(ErrorKind::kInvalidArgument, "initial reduced model has the wrong order");
  }
}

ProjectionPair contragradient_projection(const Matrix& P, const Matrix& Q, Index order) {
  const Index n = P.rows();
  if (P.cols() != n || Q.rows() != n || Q.cols() != n) {
    throw Error(ErrorKind::kDimensionMismatch, "gramians must be square and of equal size");
  }
  if (order < 1 || order > n) throw Error(ErrorKind::kInvalidArgument, "order out of range");
  const Matrix R = psd_square_root_factor(P);
  const Matrix L = psd_square_root_factor(Q);
  Eigen::BDCSVD<Matrix> svd(L.transpose() * R, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > 1e-12 * s(0)) ++rank;
  }
  if (order > rank) {
    std::ostringstream os;
    os << "requested order " << order << " exceeds the numerical rank " << rank << " of the gramian product";
    throw Error(ErrorKind::kRank, os.str());
  }
  Matrix right = R * svd.matrixV();
  Matrix left = L * svd.matrixU();
  canonicalize_ties(s, right, left);
  const Vector inv_root = s.head(order).cwiseSqrt().cwiseInverse();
  ProjectionPair pair;
  pair.V = right.leftCols(order) * inv_root.asDiagonal();
  pair.W = left.leftCols(order) * inv_root.asDiagonal();
  pair.sigma = s.head(order);
  return finalize(std::move(pair), "contragradient_projection");
}

StateSpaceModel project(const StateSpaceModel& model, const ProjectionPair& pair) {
  return {pair.W.transpose() * model.A * pair.V, pair.W.transpose() * model.B, model.C * pair.V, model.D};
}

ReductionResult tlbt(const StateSpaceModel& model, const ReductorConfig& cfg, WorkspacePtr workspace) {
  cfg.validate(model.states());
  const WorkspacePtr ws = ensure_workspace(model, cfg, std::move(workspace));
  ReductionResult result;
  result.projection = contragradient_projection(ws->controllability(), ws->observability(), cfg.order);
  result.rom = project(model, *result.projection);
  flag_stability(result);
  return result;
}

ReductionResult tlbst(const StateSpaceModel& model, const ReductorConfig& cfg, WorkspacePtr workspace) {
  cfg.validate(model.states());
  if (!model.is_square()) throw Error(ErrorKind::kInvalidArgument, "tlbst needs a square system (m = p)");
  const WorkspacePtr ws = ensure_workspace(model, cfg, std::move(workspace));
  ReductionResult result;
  const Matrix d = epsilon_regularize(model.D, cfg.epsilon);
  if (!(d.array() == model.D.array()).all()) result.diagnostics.push_back("rank-deficient D replaced by epsilon*I");
  // The Riccati and time-limited observability solves do not depend on the order.
  std::ostringstream key;
  key << "tlbst-observability eps=" << std::hexfloat << cfg.epsilon;
  const Matrix& x_tau = ws->derived(key.str(), [&] {
    const Matrix& A = model.A;
    const Matrix& B = model.B;
    const Matrix& C = model.C;
    const Matrix phi = (d * d.transpose()).inverse();
    const Matrix b_s = ws->infinite_controllability() * C.transpose() + B * d.transpose();
    const Matrix a_s = A - b_s * phi * C;
    const Matrix x_s = solve_care(Matrix(a_s.transpose()), b_s * phi * b_s.transpose(), C.transpose() * phi * C);
    const Matrix c_w = d.inverse() * (C - b_s.transpose() * x_s);
    const Matrix cw1 = c_w * ws->exp_t1(), cw2 = c_w * ws->exp_t2();
    return solve_lyapunov(op(ws->schur()).t(), cw1.transpose() * cw1 - cw2.transpose() * cw2);
  });
  result.projection = contragradient_projection(ws->controllability(), x_tau, cfg.order);
  result.rom = project(model, *result.projection);
  flag_stability(result);
  return result;
}

ReductionResult tlirka(const StateSpaceModel& model, const ReductorConfig& cfg, WorkspacePtr workspace) {
  cfg.validate(model.states());
  const WorkspacePtr ws = ensure_workspace(model, cfg, std::move(workspace));
  ReductionResult result;
  StateSpaceModel rom = cfg.initial_rom ? *cfg.initial_rom : initial_guess(model, cfg.order, cfg.init, cfg.seed);
  rom.D = model.D;
  result.rom = rom;
  result.converged = false;
  int attempt = 0;
  for (int it = 0; it < cfg.max_iter; ++it) {
    try {
      require_simple_spectrum(rom.A);
      const RealSchurForm rs = real_schur(rom.A);
      const Matrix p12 = cross_controllability(*ws, rom, rs);
      const Matrix y = cross_observability(*ws, rom, rs);
      ProjectionPair pair;
      pair.V = orthonormal_basis(p12, "time-limited cross controllability");
      const Matrix cross = pair.V.transpose() * y;
      Eigen::FullPivLU<Matrix> lu(cross);
      if (!lu.isInvertible() || lu.rcond() < 1e-14) throw Error(ErrorKind::kBreakdown, "V^T Y is singular");
      pair.W = y * lu.inverse();
      pair = finalize(std::move(pair), "tlirka");
      const StateSpaceModel next = project(model, pair);
      const double change = eigenvalue_change(rom.A, next.A);
      result.history.push_back(change);
      rom = next;
      result.rom = rom;
      result.projection = pair;
      result.iterations = it + 1;
      if (change < cfg.conv_tol) {
        result.converged = true;
        break;
      }
    } catch (const Error& e) {
      result.diagnostics.push_back(std::string("iteration ") + std::to_string(it + 1) + ": " + e.what());
      if (attempt >= cfg.restarts) break;
      ++attempt;
      result.restarts_used = attempt;
      rom = initial_guess(model, cfg.order, cfg.init, restart_seed(cfg.seed, attempt));
      rom.D = model.D;
      result.diagnostics.push_back("restarted from a fresh seeded guess");
    }
  }
  flag_stability(result);
  return result;
}

ProjectionPair biorthogonal_gram_schmidt(const Matrix& right, const Matrix& left) {
  const Index n = right.rows();
  const Index r = right.cols();
  if (left.rows() != n || left.cols() != r) {
    throw Error(ErrorKind::kDimensionMismatch, "Gram-Schmidt bases must have equal shape");
  }
  ProjectionPair pair{Matrix::Zero(n, r), Matrix::Zero(n, r), Vector()};
  for (Index i = 0; i < r; ++i) {
    Vector v = right.col(i);
    Vector w = left.col(i);
    const double v0 = v.norm(), w0 = w.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < i; ++k) {
        v -= pair.V.col(k) * pair.W.col(k).dot(v);
        w -= pair.W.col(k) * pair.V.col(k).dot(w);
      }
    }
    const double vn = v.norm(), wn = w.norm();
    if (!(vn > 1e-12 * v0) || !(wn > 1e-12 * w0)) {
      std::ostringstream os;
      os << "column " << i << " is (numerically) dependent on the previous columns";
      throw Error(ErrorKind::kBreakdown, os.str());
    }
    v /= vn;
    w /= wn;
    const double pivot = w.dot(v);
    if (!(std::abs(pivot) >= 1e-12)) {
      std::ostringstream os;
      os << "pivot w^T v = " << pivot << " at column " << i << " is below 1e-12";
      throw Error(ErrorKind::kBreakdown, os.str());
    }
    pair.V.col(i) = v / pivot;
    pair.W.col(i) = w;
  }
  return finalize(std::move(pair), "biorthogonal_gram_schmidt");
}

ReductionResult tlrhmora(const StateSpaceModel& model, const ReductorConfig& cfg, WorkspacePtr workspace) {
  cfg.validate(model.states());
  if (!model.is_square()) throw Error(ErrorKind::kInvalidArgument, "tlrhmora needs a square system (m = p)");
  const WorkspacePtr ws = ensure_workspace(model, cfg, std::move(workspace));
  const Matrix d = epsilon_regularize(model.D, cfg.epsilon);
  const StateSpaceModel regularized = model.with_feedthrough(d);

  struct Candidate {
    StateSpaceModel rom;
    std::optional<ProjectionPair> projection;
    int iterations = 0;
    bool converged = false;
  };
  std::vector<Candidate> candidates;
  ReductionResult result;
  if (!(d.array() == model.D.array()).all()) result.diagnostics.push_back("rank-deficient D replaced by epsilon*I");

  for (int attempt = 0; attempt <= cfg.restarts; ++attempt) {
    StateSpaceModel rom = (attempt == 0 && cfg.initial_rom)
                              ? *cfg.initial_rom
                              : initial_guess(model, cfg.order, cfg.init, restart_seed(cfg.seed, attempt));
    rom.D = d;
    Candidate cand;
    bool have_stable = false;
    bool failed = false;
    for (int it = 0; it < cfg.max_iter; ++it) {
      try {
        if (rom.states() > 0 && !is_hurwitz(rom.A)) throw Error(ErrorKind::kUnsupportedModel, "iterate is unstable");
        if (!rom.A.allFinite() || !rom.B.allFinite() || !rom.C.allFinite()) {
          throw Error(ErrorKind::kBreakdown, "iterate is not finite");
        }
        if (!have_stable) {
          cand.rom = rom;
          have_stable = true;
        }
        const SpectralFactorInverse factor = build_spectral_factor_inverse(rom);
        const RelErrorSystem sys = build_relerr(ws, rom, factor.as_model(), WeightKind::kSpectralFactor);
        const RelGramianBlocks blocks = relerr_gramian_blocks(sys, BlockSet::kObservabilityCoupling);
        const Matrix p12 = cross_controllability(*ws, rom, sys.rom_schur);
        const ProjectionPair pair = biorthogonal_gram_schmidt(p12, blocks.Q12);
        const StateSpaceModel next = project(regularized, pair);
        const double change = eigenvalue_change(rom.A, next.A);
        result.history.push_back(change);
        rom = next;
        cand.iterations = it + 1;
        cand.projection = pair;
        if (is_hurwitz(rom.A)) cand.rom = rom;
        if (change < cfg.conv_tol) {
          cand.converged = is_hurwitz(rom.A);
          break;
        }
      } catch (const Error& e) {
        std::ostringstream os;
        os << "attempt " << attempt << ", iteration " << it + 1 << ": " << e.what();
        result.diagnostics.push_back(os.str());
        failed = true;
        break;
      }
    }
    if (have_stable) candidates.push_back(cand);
    if (!failed) break;
    if (attempt < cfg.restarts) {
      result.diagnostics.push_back("restarted from a fresh seeded guess");
      result.restarts_used = attempt + 1;
    }
  }

  if (candidates.empty()) {
    throw Error(ErrorKind::kNonConvergence, "tlrhmora produced no stable iterate within the restart budget");
  }
  std::size_t best = candidates.size() - 1;
  if (!candidates.back().converged && candidates.size() > 1) {
    double best_value = std::numeric_limits<double>::infinity();
    RelativeErrorOptions options;
    options.epsilon = cfg.epsilon;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      try {
        StateSpaceModel probe = candidates[k].rom;
        probe.D = model.D;
        const double value = evaluate_relative_error(ws, probe, options).value;
        if (value < best_value) {
          best_value = value;
          best = k;
        }
      } catch (const Error&) {
      }
    }
  }
  const Candidate& chosen = candidates[best];
  result.rom = chosen.rom;
  result.rom.D = model.D;
  result.projection = chosen.projection;
  result.iterations = chosen.iterations;
  result.converged = chosen.converged;
  flag_stability(result);
  return result;
}

StateSpaceModel initial_guess(const StateSpaceModel& model, Index order, InitStrategy strategy, std::uint64_t seed) {
  const Index n = model.states();
  if (order < 1 || order > n) throw Error(ErrorKind::kInvalidArgument, "initial guess order out of range");
  const Index m = model.inputs(), p = model.outputs();
  if (strategy == InitStrategy::kRandomStable) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pole(-10.0, -0.1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix A = Matrix::Zero(order, order);
    for (Index i = 0; i < order; ++i) A(i, i) = pole(rng);
    Matrix B(order, m), C(p, order);
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < order; ++i) B(i, j) = gauss(rng);
    for (Index j = 0; j < order; ++j)
      for (Index i = 0; i < p; ++i) C(i, j) = gauss(rng);
    return {A, B, C, model.D};
  }

  Eigen::EigenSolver<Matrix> es(model.A, true);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::kNonConvergence, "eigenvalue iteration failed");
  const Eigen::VectorXcd lambda = es.eigenvalues();
  const ComplexMatrix X = es.eigenvectors();
  const ComplexMatrix Y = X.inverse();  // rows are left eigenvectors
  const ComplexMatrix Cc = model.C.cast<std::complex<double>>();
  const ComplexMatrix Bc = model.B.cast<std::complex<double>>();
  std::vector<std::pair<double, Index>> ranked;
  for (Index i = 0; i < n; ++i) {
    if (lambda(i).imag() < 0.0) continue;  // conjugate partner handled with the upper one
    const double residue = ((Cc * X.col(i)) * (Y.row(i) * Bc)).norm();
    ranked.emplace_back(residue / std::max(std::abs(lambda(i).real()), 1e-300), i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  Matrix V(n, order), W(n, order);
  Index filled = 0;
  for (const auto& [score, i] : ranked) {
    (void)score;
    if (filled == order) break;
    const bool complex_pair = lambda(i).imag() > 0.0;
    if (complex_pair && filled + 2 > order) continue;
    if (complex_pair) {
      V.col(filled) = X.col(i).real();
      V.col(filled + 1) = X.col(i).imag();
      W.col(filled) = Y.row(i).transpose().real();
      W.col(filled + 1) = Y.row(i).transpose().imag();
      filled += 2;
    } else {
      V.col(filled) = X.col(i).real();
      W.col(filled) = Y.row(i).transpose().real();
      filled += 1;
    }
  }
  if (filled < order) throw Error(ErrorKind::kRank, "not enough modes to build the dominant-eigenvalue guess");
  ProjectionPair pair{V, W * (V.transpose() * W).inverse(), Vector()};
  pair = finalize(std::move(pair), "initial_guess");
  return project(model, pair);
}

double eigenvalue_change(const Matrix& previous, const Matrix& current) {
  const auto a = sorted_eigenvalues(previous);
  const auto b = sorted_eigenvalues(current);
  if (a.size() != b.size()) throw Error(ErrorKind::kDimensionMismatch, "eigenvalue lists differ in length");
  double change = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    change = std::max(change, std::abs(b[i] - a[i]) / std::max(std::abs(a[i]), 1e-300));
  }
  return change;
}

}  // namespace tlmor
