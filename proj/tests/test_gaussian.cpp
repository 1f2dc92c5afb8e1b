#include <gtest/gtest.h>

#include <cmath>

#include "kel/error.hpp"
#include "kel/fit.hpp"
#include "kel/gaussian.hpp"
#include "kel/model.hpp"
#include "support.hpp"

namespace kel {
namespace {

Mat kinetic_drift() {
  Mat f(2, 2);
  f << 0, 1, -1, -1;
  return f;
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

GaussianState gauss1(double mean, double var) { return {Vec::Constant(1, mean), Mat::Constant(1, 1, var)}; }

double curve_slope(const BlockModel& model, const Vec& x, const Vec& y, double lo, double hi) {
  std::vector<std::pair<double, double>> series;
  for (const CurvePoint& p : entropy_cost_curve(model, x, y, test::logspace(lo, hi, 10))) {
    EXPECT_TRUE(p.valid);
    series.emplace_back(p.t, p.kl);
  }
  return rate_fit(series, FitMode::PowerLaw).slope;
}

TEST(Propagate, BrownianCovarianceGrowsLinearly) {
  const GaussianState s =
      propagate_linear(Mat::Zero(2, 2), Mat::Identity(2, 2), Vec::Zero(2), GaussianState::point(Vec::Zero(2)), 1.0);
  EXPECT_LE((s.cov - Mat::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(s.mean.norm(), 1e-15);
}

TEST(Propagate, KineticOuCovarianceFromPointMass) {
  const GaussianState s = propagate_model(kinetic_ou(1), GaussianState::point(Vec::Zero(2)), 1.0);
  Mat expected(2, 2);
  expected << 0.280165780375818, 0.284629927239147, 0.284629927239147, 0.699445410042150;
  EXPECT_LE((s.cov - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propagate, AgreesWithMatrixExponential) {
  Mat g(2, 1);
  g << 0, std::sqrt(2.0);
  Vec m0 = vec2(0.3, -1.2);
  Mat c0(2, 2);
  c0 << 0.5, 0.1, 0.1, 0.2;
  const double t = 1.7;
  const GaussianState s = propagate_linear(kinetic_drift(), g, Vec::Zero(2), {m0, c0}, t);
  const Mat e = test::expm(kinetic_drift() * t);
  EXPECT_LE((s.mean - e * m0).norm(), 1e-12);
  const Mat cov = e * c0 * e.transpose() + test::van_loan_covariance(kinetic_drift(), g, t);
  EXPECT_LE((s.cov - cov).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Propagate, ConstantForcingMeanOffset) {
  const GaussianState s =
      propagate_linear(kinetic_drift(), Mat::Zero(2, 1), vec2(0.0, 0.5), GaussianState::point(Vec::Zero(2)), 1.0);
  EXPECT_NEAR(s.mean(0), 0.170149923304149, 1e-12);
  EXPECT_NEAR(s.mean(1), 0.266753597557346, 1e-12);
}

TEST(GaussianKl, ScalarExamples) {
  EXPECT_NEAR(gaussian_kl(gauss1(0, 1), gauss1(1, 1)), 0.5, 1e-14);
  EXPECT_NEAR(gaussian_kl(gauss1(0, 2), gauss1(0, 1)), 0.5 * (1.0 - std::log(2.0)), 1e-14);
  EXPECT_NEAR(gaussian_kl(gauss1(0, 1), gauss1(0, 2)), 0.5 * (0.5 - 1.0 + std::log(2.0)), 1e-14);
  EXPECT_NEAR(gaussian_kl(gauss1(0, 2), gauss1(0, 1)), 0.1534264097200273, 1e-12);
}

TEST(GaussianKl, NonnegativeZeroOnDiagonalAndAffineInvariant) {
  const RowMat pts = test::normal_cloud(40, 2, 3, 0);
  for (int i = 0; i + 3 < 40; i += 4) {
    Mat lp(2, 2), lq(2, 2);
    lp << 1 + std::abs(pts(i, 0)), 0, pts(i, 1), 0.5 + std::abs(pts(i + 1, 0));
    lq << 1 + std::abs(pts(i + 1, 1)), 0, pts(i + 2, 0), 0.5 + std::abs(pts(i + 2, 1));
    const GaussianState p{pts.row(i + 3).transpose(), lp * lp.transpose()};
    const GaussianState q{Vec::Zero(2), lq * lq.transpose()};
    const double kl = gaussian_kl(p, q);
    EXPECT_GE(kl, 0.0);
    EXPECT_NEAR(gaussian_kl(p, p), 0.0, 1e-12);
    Mat a(2, 2);
    a << 2.0, 0.3, -0.4, 0.7;
    const Vec shift = vec2(1.0, -5.0);
    const GaussianState pa{a * p.mean + shift, a * p.cov * a.transpose()};
    const GaussianState qa{a * q.mean + shift, a * q.cov * a.transpose()};
    EXPECT_NEAR(gaussian_kl(pa, qa), kl, 1e-9 * std::max(1.0, kl));
  }
}

TEST(GaussianKl, SingularReferenceIsRejected) {
  const GaussianState p{Vec::Zero(2), Mat::Identity(2, 2)};
  try {
    gaussian_kl(p, GaussianState::point(Vec::Zero(2)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularReference);
  }
  Mat rank_one(2, 2);
  rank_one << 1, 1, 1, 1;
  EXPECT_THROW(gaussian_kl(p, {Vec::Zero(2), rank_one}), Error);
}

TEST(GaussianKl, EquilibratedSmallTimeCovarianceIsAccepted) {
  const GaussianState q = propagate_model(kinetic_ou(1), GaussianState::point(Vec::Zero(2)), 1e-3);
  const KlDetail d = gaussian_kl_detail(q, q);
  EXPECT_NEAR(d.value, 0.0, 1e-10);
  EXPECT_LT(d.condition, 1e12);
}

TEST(GaussianW2, Examples) {
  EXPECT_NEAR(gaussian_w2(gauss1(0, 1), gauss1(1, 4)), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(gaussian_w2(gauss1(3, 1), gauss1(3, 1)), 0.0, 1e-12);
  const GaussianState p{Vec::Zero(2), Mat::Identity(2, 2)};
  const GaussianState q{vec2(3, 4), Mat::Identity(2, 2)};
  EXPECT_NEAR(gaussian_w2(p, q), 5.0, 1e-12);
}

TEST(GaussianW2, MetricProperties) {
  const RowMat pts = test::normal_cloud(30, 3, 7, 0);
  auto state = [&](int i) {
    Mat l(2, 2);
    l << 1 + std::abs(pts(i, 0)), 0, pts(i, 1), 0.3 + std::abs(pts(i, 2));
    return GaussianState{vec2(pts(i + 1, 0), pts(i + 1, 1)), l * l.transpose()};
  };
  for (int i = 0; i + 5 < 30; i += 6) {
    const GaussianState a = state(i), b = state(i + 2), c = state(i + 4);
    EXPECT_NEAR(gaussian_w2(a, b), gaussian_w2(b, a), 1e-9);
    EXPECT_LE(gaussian_w2(a, c), gaussian_w2(a, b) + gaussian_w2(b, c) + 1e-9);
    EXPECT_NEAR(gaussian_w2(a, a), 0.0, 1e-6);
    EXPECT_GE(gaussian_w2(a, b), (a.mean - b.mean).norm() - 1e-12);
  }
}

TEST(EntropyCostCurve, IdenticalStartsGiveZero) {
  for (const CurvePoint& p : entropy_cost_curve(kinetic_ou(1), vec2(1, 2), vec2(1, 2), {0.01, 0.1, 1.0})) {
    EXPECT_TRUE(p.valid);
    EXPECT_NEAR(p.kl, 0.0, 1e-12);
  }
}

TEST(EntropyCostCurve, SmallTimeExponents) {
  EXPECT_NEAR(curve_slope(kinetic_ou(1), vec2(0.1, 0), Vec::Zero(2), 1e-3, 1e-2), -3.0, 0.1);
  EXPECT_NEAR(curve_slope(kinetic_ou(1), vec2(0, 0.1), Vec::Zero(2), 1e-3, 1e-2), -1.0, 0.1);
  Vec far(3);
  far << 0.1, 0.0, 0.0;
  EXPECT_NEAR(curve_slope(chain_model(), far, Vec::Zero(3), 1e-3, 1e-2), -5.0, 0.1);
}

TEST(EntropyCostCurve, LeadingSmallTimeConstant) {
  // KL ~ 3 dx^2 / t^3 for the position shift of the kinetic model.
  const double t = 1e-3;
  const CurvePoint p = entropy_cost_curve(kinetic_ou(1), vec2(0.1, 0), Vec::Zero(2), {t}).front();
  EXPECT_NEAR(p.kl * t * t * t / (3.0 * 0.01), 1.0, 1e-5);
}

TEST(EntropyCostCurve, FiniteAcrossTheUnitInterval) {
  Vec far(3);
  far << 1.0, -1.0, 0.5;
  for (const CurvePoint& p : entropy_cost_curve(chain_model(), far, Vec::Zero(3), test::logspace(1e-3, 1.0, 20))) {
    EXPECT_TRUE(p.valid) << p.t;
    EXPECT_TRUE(std::isfinite(p.kl)) << p.t;
    EXPECT_GT(p.kl, 0.0);
  }
}

TEST(EntropyCostCurve, DecreasesInTime) {
  const auto curve = entropy_cost_curve(kinetic_ou(1), vec2(1, -1), Vec::Zero(2), test::logspace(1e-3, 5.0, 30));
  for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].kl, curve[i - 1].kl);
}

}  // namespace
}  // namespace kel
