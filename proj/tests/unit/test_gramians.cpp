// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "test_support.hpp"
#include "tlmor/error.hpp"
#include "tlmor/gramians.hpp"

namespace tlmor {
namespace {

using testing::randn;
using testing::rel_diff;
using testing::Rng;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

const StateSpaceModel kScalar{scalar(-1), scalar(1), scalar(1), scalar(0)};

TEST(TlGramians, EmptyIntervalIsZero) {
  Rng rng(1);
  const auto g = tl_gramians(testing::random_stable_model(rng, 5, 2, 2), {0.0, 0.0});
  EXPECT_EQ(g.P.norm(), 0.0);
  EXPECT_EQ(g.Q.norm(), 0.0);
}

TEST(TlGramians, ScalarClosedForm) {
  for (double td : {0.1, 0.5, 2.0, 7.0}) {
    const auto g = tl_gramians(kScalar, {0.0, td});
    const double expected = 0.5 * (1.0 - std::exp(-2.0 * td));
    EXPECT_NEAR(g.P(0, 0), expected, 1e-15);
    EXPECT_NEAR(g.Q(0, 0), expected, 1e-15);
  }
}

TEST(TlGramians, MatchesSimpsonQuadrature) {
  Rng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const StateSpaceModel h = testing::random_stable_model(rng, 8, 2, 3);
    const TimeInterval tau{0.2, 0.9};
    const auto g = tl_gramians(h, tau);
    EXPECT_LE(rel_diff(g.P, testing::quadrature_gramian(h.A, h.B, tau.t1, tau.t2, 2000)), 1e-6);
    const Matrix qq = testing::quadrature_gramian(h.A.transpose(), h.C.transpose(), tau.t1, tau.t2, 2000);
    EXPECT_LE(rel_diff(g.Q, qq), 1e-6);
  }
}

TEST(TlGramians, SymmetricAndPositiveSemidefinite) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = tl_gramians(testing::random_stable_model(rng, 10, 2, 2), {0.3, 1.4});
    for (const Matrix* m : {&g.P, &g.Q}) {
      EXPECT_LE((*m - m->transpose()).norm(), 1e-12 * m->norm());
      Eigen::SelfAdjointEigenSolver<Matrix> es(*m);
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * m->trace());
    }
  }
}

TEST(TlGramians, RejectsUnstableModel) {
  try {
    tl_gramians({scalar(0.5), scalar(1), scalar(1), scalar(0)}, {0.0, 1.0});
    FAIL() << "expected unsupported-model error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnsupportedModel);
  }
}

TEST(TlGramians, IntervalAdditivity) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const StateSpaceModel h = testing::random_stable_model(rng, 7, 2, 2);
    const auto whole = tl_gramians(h, {0.0, 1.3});
    const auto head = tl_gramians(h, {0.0, 0.4});
    const auto tail = tl_gramians(h, {0.4, 1.3});
    EXPECT_LE(rel_diff(whole.P, head.P + tail.P), 1e-9);
    EXPECT_LE(rel_diff(whole.Q, head.Q + tail.Q), 1e-9);
  }
}

TEST(TlGramians, TraceMonotoneInHorizon) {
  Rng rng(9);
  const StateSpaceModel h = testing::random_stable_model(rng, 6, 1, 1);
  double previous = 0.0;
  for (int k = 1; k <= 30; ++k) {
    const double tr = tl_gramians(h, {0.0, 0.1 * k}).P.trace();
    EXPECT_GE(tr, previous - 1e-14 * std::abs(tr));
    previous = tr;
  }
}

TEST(TlGramians, LongHorizonMatchesInfinite) {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const StateSpaceModel h = testing::random_stable_model(rng, 6, 2, 2);
    const double t2 = 80.0;  // abscissa ≤ -0.5 gives ‖e^{A t2}‖ far below 1e-12
    ASSERT_LE(matrix_exponential(h.A, t2).norm(), 1e-12);
    const auto g = tl_gramians(h, {0.0, t2});
    EXPECT_LE(rel_diff(g.P, infinite_controllability_gramian(h)), 1e-8);
    EXPECT_LE(rel_diff(g.Q, infinite_observability_gramian(h)), 1e-8);
  }
}

TEST(H2TauNorm, ZeroInputGivesZero) {
  Rng rng(4);
  StateSpaceModel h = testing::random_stable_model(rng, 5, 2, 2);
  h.B.setZero();
  EXPECT_EQ(h2tau_norm(h, {0.0, 1.0}), 0.0);
}

TEST(H2TauNorm, ScalarClosedForm) {
  EXPECT_NEAR(h2tau_norm(kScalar, {0.0, 0.7}), std::sqrt(0.5 * (1.0 - std::exp(-1.4))), 1e-15);
}

TEST(H2TauNorm, MatchesQuadratureAndDuality) {
  Rng rng(100);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + trial % 10;
    const Index m = 1 + trial % 2;
    const StateSpaceModel h = testing::random_stable_model(rng, n, m, m);
    const TimeInterval tau{0.1 * (trial % 3), 1.0 + 0.1 * (trial % 5)};
    const double norm = h2tau_norm(h, tau);
    EXPECT_NEAR(norm, quadrature_h2tau_oracle(h, tau, 2000), 1e-5 * norm) << "trial " << trial;
    const auto g = tl_gramians(h, tau);
    const double p_form = (h.C * g.P * h.C.transpose()).trace();
    const double q_form = (h.B.transpose() * g.Q * h.B).trace();
    EXPECT_NEAR(p_form, q_form, 1e-8 * std::abs(p_form)) << "trial " << trial;
  }
}

TEST(QuadratureOracle, ZeroSystem) {
  const StateSpaceModel zero{scalar(-1), scalar(0), scalar(1), scalar(0)};
  EXPECT_EQ(quadrature_h2tau_oracle(zero, {0.0, 1.0}, 10), 0.0);
}

TEST(QuadratureOracle, ScalarClosedForm) {
  const double exact = std::sqrt(0.5 * (1.0 - std::exp(-2.0)));
  EXPECT_NEAR(quadrature_h2tau_oracle(kScalar, {0.0, 1.0}, 2000), exact, 1e-9);
}

TEST(QuadratureOracle, FourthOrderConvergence) {
  const double exact = 0.5 * (1.0 - std::exp(-6.0));  // squared norm over [0,3]
  const auto err = [&](int panels) {
    const double v = quadrature_h2tau_oracle(kScalar, {0.0, 3.0}, panels);
    return std::abs(v * v - exact);
  };
  const double ratio = err(16) / err(32);
  EXPECT_GT(ratio, 14.0);
  EXPECT_LT(ratio, 18.0);
}

TEST(QuadratureOracle, RejectsTooFewPanels) {
  EXPECT_THROW(quadrature_h2tau_oracle(kScalar, {0.0, 1.0}, 1), Error);
}

TEST(Workspace, SharedAccessorsMatchDirectSolve) {
  Rng rng(14);
  const StateSpaceModel h = testing::random_stable_model(rng, 9, 2, 2);
  const TimeInterval tau{0.25, 1.5};
  const WorkspacePtr ws = make_workspace(h, tau);
  const auto g = tl_gramians(h, tau);
  EXPECT_LE(rel_diff(ws->controllability(), g.P), 1e-13);
  EXPECT_LE(rel_diff(ws->observability(), g.Q), 1e-13);
  EXPECT_EQ(ws->exp_t2(), matrix_exponential(h.A, tau.t2));
}

}  // namespace
}  // namespace tlmor
