// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <complex>
#include <limits>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "tlmor/error.hpp"
#include "tlmor/gramians.hpp"
#include "tlmor/lti_model.hpp"

namespace tlmor {
namespace {

using testing::randn;
using testing::Rng;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

bool has_code(const std::vector<Diagnostic>& diags, DiagnosticCode code) {
  for (const auto& d : diags) {
    if (d.code == code) return true;
  }
  return false;
}

TEST(StateSpaceModel, RejectsInconsistentDimensions) {
  EXPECT_THROW(StateSpaceModel(Matrix::Zero(2, 2), Matrix::Zero(3, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1)),
               Error);
  EXPECT_THROW(StateSpaceModel(Matrix::Zero(2, 2), Matrix::Zero(2, 1), Matrix::Zero(1, 2), Matrix::Zero(2, 1)),
               Error);
}

TEST(StateSpaceModel, RejectsNonFiniteEntries) {
  Matrix a = scalar(-1.0);
  a(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(StateSpaceModel(a, scalar(1), scalar(1), scalar(0)), Error);
}

TEST(StateSpaceModel, PureGainHasZeroStates) {
  const StateSpaceModel g(Matrix(0, 0), Matrix(0, 2), Matrix(2, 0), 2.0 * Matrix::Identity(2, 2));
  EXPECT_EQ(g.states(), 0);
  EXPECT_EQ(g.inputs(), 2);
  EXPECT_EQ(g.outputs(), 2);
}

TEST(TimeInterval, RejectsReversedOrNegative) {
  EXPECT_THROW((TimeInterval{1.0, 0.5}.validate()), Error);
  EXPECT_THROW((TimeInterval{-0.1, 0.5}.validate()), Error);
  EXPECT_THROW((TimeInterval{0.0, std::numeric_limits<double>::infinity()}.validate()), Error);
  EXPECT_NO_THROW((TimeInterval{0.0, 0.0}.validate()));
}

TEST(Validate, ZeroFeedthroughIsRankDeficient) {
  const auto diags = validate({scalar(-1), scalar(1), scalar(1), scalar(0)});
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].code, DiagnosticCode::kRankDeficientD);
}

TEST(Validate, PositiveEigenvalueIsNotHurwitz) {
  const auto diags = validate({scalar(1), scalar(1), scalar(1), scalar(1)});
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].code, DiagnosticCode::kNotHurwitz);
}

TEST(Validate, StableModelWithZeroDReportsOnlyRank) {
  Rng rng(11);
  const StateSpaceModel h = testing::random_stable_model(rng, 12, 2, 2);
  const auto diags = validate(h);
  EXPECT_TRUE(has_code(diags, DiagnosticCode::kRankDeficientD));
  EXPECT_FALSE(has_code(diags, DiagnosticCode::kNotHurwitz));
  EXPECT_EQ(diags.size(), 1u);
}

TEST(Validate, ReportsNonFiniteAndMismatchWithoutThrowing) {
  StateSpaceModel h{scalar(-1), scalar(1), scalar(1), scalar(1)};
  h.B(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_TRUE(has_code(validate(h), DiagnosticCode::kNonFinite));
  h.B = Matrix::Zero(2, 1);
  EXPECT_TRUE(has_code(validate(h), DiagnosticCode::kDimensionMismatch));
}

TEST(InverseRealization, PureGain) {
  const StateSpaceModel g(Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), scalar(2));
  const auto inv = inverse_realization(g);
  EXPECT_EQ(inv.states(), 0);
  EXPECT_DOUBLE_EQ(inv.D(0, 0), 0.5);
}

TEST(InverseRealization, HandComputedScalar) {
  const auto inv = inverse_realization({scalar(-1), scalar(1), scalar(1), scalar(1)});
  EXPECT_DOUBLE_EQ(inv.A(0, 0), -2.0);
  EXPECT_DOUBLE_EQ(inv.B(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(inv.C(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(inv.D(0, 0), 1.0);
  // H⁻¹(s) = (s+1)/(s+2)
  const std::complex<double> s(0.3, 1.7);
  EXPECT_LT(std::abs(transfer_function(inv, s)(0, 0) - (s + 1.0) / (s + 2.0)), 1e-14);
}

TEST(InverseRealization, RejectsSingularOrRectangular) {
  EXPECT_THROW(inverse_realization({scalar(-1), scalar(1), scalar(1), scalar(0)}), Error);
  Rng rng(2);
  const StateSpaceModel rect = testing::random_stable_model(rng, 3, 2, 1);
  try {
    inverse_realization(rect.with_feedthrough(Matrix::Ones(1, 2)));
    FAIL() << "expected inversion error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInversion);
  }
}

TEST(InverseRealization, TransferProductIsIdentity) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix d = Matrix::Identity(2, 2) + 0.3 * randn(rng, 2, 2);
    const StateSpaceModel h = testing::random_minimum_phase(rng, 4, 2, d);
    const auto inv = inverse_realization(h);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const std::complex<double> s(0.0, std::pow(10.0, -2.0 + 4.0 * k / 19.0));
      const ComplexMatrix prod = transfer_function(h, s) * transfer_function(inv, s);
      worst = std::max(worst, (prod - ComplexMatrix::Identity(2, 2)).norm());
    }
    EXPECT_LE(worst, 1e-9);
  }
}

TEST(InverseRealization, InvolutionAtTransferLevel) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix d = Matrix::Identity(2, 2) + 0.3 * randn(rng, 2, 2);
    const StateSpaceModel h = testing::random_minimum_phase(rng, 5, 2, d);
    const auto twice = inverse_realization(inverse_realization(h));
    for (int k = 0; k < 20; ++k) {
      const std::complex<double> s(0.0, std::pow(10.0, -2.0 + 4.0 * k / 19.0));
      const ComplexMatrix a = transfer_function(h, s);
      EXPECT_LE((a - transfer_function(twice, s)).norm(), 1e-8 * std::max(1.0, a.norm()));
    }
  }
}

TEST(EpsilonRegularize, Cases) {
  EXPECT_TRUE(epsilon_regularize(Matrix::Zero(3, 3), 1e-4).isApprox(1e-4 * Matrix::Identity(3, 3)));
  EXPECT_EQ(epsilon_regularize(Matrix::Identity(2, 2), 1e-4), Matrix::Identity(2, 2));
  Matrix near(2, 2);
  near << 1, 0, 0, 1e-15;
  EXPECT_TRUE(epsilon_regularize(near, 1e-4).isApprox(1e-4 * Matrix::Identity(2, 2)));
  EXPECT_THROW(epsilon_regularize(Matrix::Zero(2, 3), 1e-4), Error);
  EXPECT_THROW(epsilon_regularize(Matrix::Zero(2, 2), 0.0), Error);
}

TEST(ImpulseResponse, ZeroTimeIsCB) {
  Rng rng(3);
  const StateSpaceModel h = testing::random_stable_model(rng, 6, 2, 3);
  const auto samples = impulse_response(h, {0.0});
  EXPECT_EQ(samples[0], Matrix(h.C * h.B));
}

TEST(ImpulseResponse, ScalarClosedForm) {
  const auto samples = impulse_response({scalar(-1), scalar(1), scalar(1), scalar(0)}, {0.5, 1.0});
  EXPECT_NEAR(samples[1](0, 0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(samples[0](0, 0), std::exp(-0.5), 1e-15);
}

TEST(ImpulseResponse, RejectsNegativeOrUnorderedGrid) {
  const StateSpaceModel h{scalar(-1), scalar(1), scalar(1), scalar(0)};
  EXPECT_THROW(impulse_response(h, {-0.1}), Error);
}

TEST(ImpulseResponse, TrapezoidEnergyMatchesGramianNorm) {
  Rng rng(8);
  const StateSpaceModel h = testing::random_stable_model(rng, 6, 2, 2);
  const TimeInterval tau{0.0, 2.0};
  const int points = 20001;
  std::vector<double> grid(points);
  for (int k = 0; k < points; ++k) grid[static_cast<std::size_t>(k)] = tau.t2 * k / (points - 1);
  const auto samples = impulse_response(h, grid);
  const double h_step = tau.t2 / (points - 1);
  double sum = 0.0;
  for (int k = 0; k < points; ++k) {
    const double w = (k == 0 || k == points - 1) ? 0.5 : 1.0;
    sum += w * samples[static_cast<std::size_t>(k)].squaredNorm();
  }
  const double norm = h2tau_norm(h, tau);
  EXPECT_NEAR(sum * h_step, norm * norm, 1e-5 * norm * norm);
}

TEST(MinimumPhase, DetectsRightHalfPlaneZero) {
  // H(s) = (s - 1)/(s + 1) = 1 - 2/(s+1)
  EXPECT_FALSE(is_minimum_phase({scalar(-1), scalar(1), scalar(-2), scalar(1)}));
  // H(s) = (s + 2)/(s + 1)
  EXPECT_TRUE(is_minimum_phase({scalar(-1), scalar(1), scalar(1), scalar(1)}));
}

TEST(AdditiveError, StructureMatchesParallelDifference) {
  Rng rng(4);
  const StateSpaceModel h = testing::random_stable_model(rng, 4, 2, 2);
  const StateSpaceModel r = testing::random_stable_model(rng, 2, 2, 2);
  const StateSpaceModel e = additive_error_system(h, r);
  EXPECT_EQ(e.states(), 6);
  const std::complex<double> s(0.1, 2.0);
  EXPECT_LE((transfer_function(e, s) - (transfer_function(h, s) - transfer_function(r, s))).norm(), 1e-13);
}

}  // namespace
}  // namespace tlmor
