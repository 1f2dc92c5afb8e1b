#include <gtest/gtest.h>

#include <cmath>

#include "kel/error.hpp"
#include "kel/gramian.hpp"
#include "kel/model.hpp"
#include "support.hpp"

namespace kel {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::InvalidArgument;
}

TEST(FlowK, ClosedForms) {
  EXPECT_LE((flow_K(kinetic_ou(1), 2.0, 0.5) - Mat::Identity(1, 1)).norm(), 1e-14);
  Mat expected(2, 2);
  expected << 1.0, 1.5, 0.0, 1.0;
  EXPECT_LE((flow_K(chain_model(), 2.0, 0.5) - expected).norm(), 1e-10);
  EXPECT_LE((flow_K(chain_model(), 1.0, 1.0) - Mat::Identity(2, 2)).norm(), 1e-14);
}

TEST(FlowK, RespectsGrowthBound) {
  Mat a(2, 2);
  a << 0.3, -1.0, 0.5, -0.2;
  Mat b = Mat::Identity(2, 2);
  const BlockModel m = linear_model(a, b, Mat::Zero(2, 4), Vec::Zero(2), Mat::Identity(2, 2));
  ProbePlan plan;
  plan.n_states = 100;
  const double L = flow_growth_bound(m, plan);
  EXPECT_NEAR(L, a.operatorNorm(), 1e-12);
  for (double t : {0.1, 1.0, 3.0}) {
    EXPECT_LE(flow_K(m, t, 0.0).operatorNorm(), std::exp(L * t) * (1 + 1e-12));
    EXPECT_LE((flow_K(m, t, 0.0) - test::expm(a * t)).norm(), 1e-9);
  }
  EXPECT_NEAR(flow_growth_bound(kinetic_ou(1), plan), 0.0, 1e-14);
  EXPECT_NEAR(flow_growth_bound(chain_model(), plan), 1.0, 1e-14);
}

TEST(Gramian, FullWindowIsOneSixthOfT) {
  for (double t : {0.5, 1.0, 4.0}) {
    const GramianResult g = gramian_Q(kinetic_ou(1), t, t);
    EXPECT_NEAR(g.Q(0, 0), t / 6.0, 1e-14 * t);
    EXPECT_NEAR(g.lambda_min, t / 6.0, 1e-14 * t);
  }
}

TEST(Gramian, PartialWindowMatchesPolynomial) {
  for (double s : {1e-4, 1e-2, 0.3, 0.9}) {
    const double t = 1.0;
    const double exact = s * s / (2 * t) - s * s * s / (3 * t * t);
    EXPECT_NEAR(gramian_Q(kinetic_ou(1), t, s).lambda_min, exact, 1e-13 * std::max(exact, 1e-3)) << s;
  }
}

TEST(Gramian, ChainMatrixMatchesSymbolicIntegral) {
  const GramianResult g = gramian_Q(chain_model(), 1.0, 0.5);
  Mat expected(2, 2);
  expected << 0.040625, 0.057291666666666667, 0.057291666666666667, 1.0 / 12.0;
  EXPECT_LE((g.Q - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(g.lambda_min, 0.00083723748977348105, 1e-15);
}

TEST(Gramian, ScalingExponents) {
  const auto grid = test::logspace(1e-3, 1e-1, 8);
  const ScalingResult one = verify_gramian_scaling(kinetic_ou(1), 1.0, grid);
  EXPECT_EQ(one.expected_exponent, 2);
  EXPECT_NEAR(one.slope, 2.0, 0.05);
  EXPECT_GT(one.c0, 0.0);
  const ScalingResult two = verify_gramian_scaling(chain_model(), 1.0, grid);
  EXPECT_EQ(two.expected_exponent, 4);
  EXPECT_NEAR(two.slope, 4.0, 0.05);
  EXPECT_GT(two.c0, 0.0);
  for (double m : two.margins) EXPECT_GE(m, -1e-15);
}

TEST(Gramian, UncontrolledModelIsNotPositiveDefinite) {
  const BlockModel m = linear_model(Mat::Zero(1, 1), Mat::Zero(1, 1), Mat::Zero(1, 2), Vec::Zero(1),
                                    Mat::Identity(1, 1));
  EXPECT_EQ(code_of([&] { verify_gramian_scaling(m, 1.0, test::logspace(1e-3, 1e-1, 8)); }),
            ErrorCode::NotPositiveDefinite);
}

TEST(Gramian, MonotoneInWindowAndStableInNodes) {
  Mat prev = Mat::Zero(2, 2);
  for (double s : test::linspace(0.05, 1.0, 12)) {
    const Mat q = gramian_Q(chain_model(), 1.0, s).Q;
    EXPECT_GE(lambda_min(q - prev), -1e-14) << s;
    prev = q;
    EXPECT_LE((gramian_Q(chain_model(), 1.0, s, 128).Q - q).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Gramian, Preconditions) {
  EXPECT_EQ(code_of([] { gramian_Q(kinetic_ou(1), 1.0, 0.0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { gramian_Q(kinetic_ou(1), 1.0, 2.0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { gramian_Q(kinetic_ou(1), 1.0, 0.5, 8); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { flow_K(kinetic_ou(1), 1.0, 2.0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { verify_gramian_scaling(kinetic_ou(1), 1.0, test::logspace(1e-2, 1e-1, 8)); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { verify_gramian_scaling(kinetic_ou(1), 1.0, test::logspace(1e-3, 1e-1, 5)); }),
            ErrorCode::InvalidArgument);
}

}  // namespace
}  // namespace kel
