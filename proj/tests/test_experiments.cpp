#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "kel/error.hpp"
#include "kel/experiments.hpp"
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

double value_at(const ExperimentReport& r, const std::string& quantity, double t) {
  for (const auto& [tt, v] : r.series(quantity)) {
    if (std::abs(tt - t) < 1e-12) return v;
  }
  ADD_FAILURE() << quantity << " has no value at " << t;
  return NAN;
}

ModelSpec shifted_ou(double delta) {
  ModelSpec s;
  s.drift_shift = Vec::Constant(1, delta);
  return s;
}

CouplingParams small_coupling(double theta) {
  CouplingParams p;
  p.model.theta = theta;
  Vec mx(2), my(2);
  mx << 2.0, 0.0;
  my << -2.0, 0.0;
  p.init.x = InitialLaw::gaussian(mx, Mat::Identity(2, 2));
  p.init.y = InitialLaw::gaussian(my, 0.25 * Mat::Identity(2, 2));
  p.n = 256;
  p.h = 1e-2;
  p.T = 10.0;
  p.replay_check = false;
  return p;
}

TEST(EntropyBound, IdenticalModelsGiveZero) {
  const BlockModel m = kinetic_ou(1);
  EXPECT_EQ(entropy_bound_rhs(m, m, 2.0), 0.0);
}

TEST(EntropyBound, ConstantShiftIsLinearInTime) {
  const BlockModel shifted = with_drift_shift(kinetic_ou(1), Vec::Constant(1, 0.5));
  for (double t : {0.1, 1.0, 5.0}) {
    EXPECT_NEAR(entropy_bound_rhs(shifted, kinetic_ou(1), t), 0.0625 * t, 1e-12 * t);
  }
}

TEST(EntropyBound, FirstBlockDifferenceIsOutsideRange) {
  BlockModel moved = kinetic_ou(1);
  moved.b = [](const Vec&, const MeasureSummary*) -> Vec { return Vec::Constant(1, 0.3); };
  EXPECT_EQ(code_of([&] { entropy_bound_rhs(moved, kinetic_ou(1), 1.0); }),
            ErrorCode::DriftDifferenceOutsideRange);
}

TEST(EntropyInequality, ExactKlMatchesHighPrecisionValues) {
  const ExperimentReport r = verify_entropy_inequality_gaussian(
      shifted_ou(0.5), ModelSpec{}, GaussianState::point(Vec::Zero(2)), {0.1, 1.0, 5.0});
  EXPECT_NEAR(value_at(r, "exact_kl", 0.1), 0.006249999131737885, 1e-12);
  EXPECT_NEAR(value_at(r, "exact_kl", 1.0), 0.06241125517279275, 1e-11);
  EXPECT_NEAR(value_at(r, "exact_kl", 5.0), 0.147458508215032, 1e-10);
  EXPECT_NEAR(value_at(r, "margin", 0.1), 0.00625 - 0.006249999131737885, 1e-12);
  EXPECT_TRUE(r.flags.at("margins_positive"));
  EXPECT_LT(r.scalars.at("max_ratio"), 1.0);
}

TEST(EntropyInequality, HoldsFromGaussianStart) {
  Mat cov(2, 2);
  cov << 0.5, 0.1, 0.1, 0.3;
  Vec mean(2);
  mean << 1.0, -0.5;
  const ExperimentReport r =
      verify_entropy_inequality_gaussian(shifted_ou(0.8), ModelSpec{}, {mean, cov}, test::linspace(0.1, 3.0, 15));
  EXPECT_TRUE(r.flags.at("margins_nonnegative"));
  for (const auto& [t, v] : r.series("bound")) EXPECT_NEAR(v, 0.16 * t, 1e-12);
}

TEST(ShortTime, KineticModelMatchesPrediction) {
  Vec x(2);
  x << 0.1, 0.0;
  const ExperimentReport r = shorttime_scaling(ModelSpec{}, x, Vec::Zero(2), test::logspace(1e-3, 1e-2, 10));
  EXPECT_EQ(r.scalars.at("kalman_index"), 0.0);
  EXPECT_EQ(r.scalars.at("expected_slope"), -3.0);
  EXPECT_NEAR(r.scalars.at("slope"), -3.0, 0.05);
  EXPECT_TRUE(r.flags.at("within_tolerance"));
}

TEST(ShortTime, ChainDecaysSlowerThanTheUpperExponent) {
  ModelSpec chain;
  chain.preset = "chain";
  Vec far(3);
  far << 0.1, 0.0, 0.0;
  const ExperimentReport r = shorttime_scaling(chain, far, Vec::Zero(3), test::logspace(1e-3, 1e-2, 10));
  EXPECT_EQ(r.scalars.at("kalman_index"), 1.0);
  EXPECT_EQ(r.scalars.at("expected_slope"), -7.0);
  EXPECT_NEAR(r.scalars.at("slope"), -5.0, 0.05);
  EXPECT_FALSE(r.flags.at("within_tolerance"));
  EXPECT_TRUE(r.flags.at("consistent_with_bound"));
}

TEST(ShortTime, SlopeStableUnderGridThinning) {
  Vec x(2);
  x << 0.2, -0.1;
  const auto grid = test::logspace(1e-3, 1e-2, 20);
  std::vector<double> half;
  for (std::size_t i = 0; i < grid.size(); i += 2) half.push_back(grid[i]);
  const double full = shorttime_scaling(ModelSpec{}, x, Vec::Zero(2), grid).scalars.at("slope");
  const double thin = shorttime_scaling(ModelSpec{}, x, Vec::Zero(2), half).scalars.at("slope");
  EXPECT_LE(std::abs(full - thin), 0.1);
}

TEST(ShortTime, RejectsEqualStarts) {
  EXPECT_EQ(code_of([] { shorttime_scaling(ModelSpec{}, Vec::Zero(2), Vec::Zero(2), {0.01, 0.1}); }),
            ErrorCode::InvalidArgument);
}

TEST(Coupling, NoInteractionDecaysAtTheLinearRate) {
  // Without interaction the coupled difference solves a linear ODE whose
  // eigenvalues have real part -1/2, so E[psi_bar^2] decays at rate 1.
  const ExperimentReport r = coupling_contraction(small_coupling(0.0));
  EXPECT_NEAR(r.scalars.at("kappa"), 0.2763932022500210, 1e-14);
  EXPECT_NEAR(r.scalars.at("fitted_rate"), 1.0, 0.1);
  EXPECT_TRUE(r.flags.at("pass"));
}

TEST(Coupling, PassFlagStableUnderDoublingN) {
  CouplingParams p = small_coupling(0.05);
  const ExperimentReport a = coupling_contraction(p);
  p.n *= 2;
  const ExperimentReport b = coupling_contraction(p);
  EXPECT_EQ(a.flags.at("pass"), b.flags.at("pass"));
  EXPECT_TRUE(a.flags.at("pass"));
  EXPECT_NEAR(a.scalars.at("fitted_rate"), b.scalars.at("fitted_rate"), 0.1);
}

TEST(Coupling, ReplayIsIdentical) {
  CouplingParams p = small_coupling(0.05);
  p.n = 64;
  p.T = 2.0;
  p.replay_check = true;
  EXPECT_TRUE(coupling_contraction(p).flags.at("replay_identical"));
}

TEST(Coupling, IdenticalMarginsAreDegenerate) {
  CouplingParams p = small_coupling(0.05);
  p.init.y = p.init.x;
  p.init.coupling = CouplingKind::SamePoint;
  p.T = 2.0;
  EXPECT_EQ(code_of([&] { coupling_contraction(p); }), ErrorCode::DegenerateSeries);
}

TEST(Ergodicity, RestartAtEquilibriumStaysAtTheNoiseFloor) {
  ErgodicityParams p;
  p.start = InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  p.n = 256;
  p.h = 1e-2;
  p.T = 6.0;
  p.bootstrap_resamples = 4;
  p.restart_from_equilibrium = true;
  p.stationarity_tolerance = 1e9;
  const ExperimentReport r = ergodicity_experiment(p);
  const double floor = r.scalars.at("noise_floor_w2");
  EXPECT_GT(floor, 0.0);
  double worst = 0.0;
  for (const auto& [t, v] : r.series("w2")) worst = std::max(worst, v);
  EXPECT_LE(worst, 2.0 * floor);
  EXPECT_FALSE(r.flags.at("w2_rate_pass"));
}

TEST(Ergodicity, FailedAuditSkipsFits) {
  ErgodicityParams p;
  Vec start(2);
  start << 6.0, 0.0;
  p.start = InitialLaw::point_mass(start);
  p.n = 128;
  p.h = 1e-2;
  p.T = 2.0;
  p.bootstrap_resamples = 4;
  const ExperimentReport r = ergodicity_experiment(p);
  EXPECT_FALSE(r.flags.at("stationary"));
  EXPECT_TRUE(r.fits.empty());
  EXPECT_FALSE(r.series("w2").empty());
}

TEST(Params, JsonRoundTrip) {
  CouplingParams c = small_coupling(0.07);
  c.init.coupling = CouplingKind::Optimal;
  EXPECT_EQ(to_json(coupling_params_from_json(to_json(c))), to_json(c));
  ErgodicityParams e;
  e.n = 300;
  e.safety = 0.7;
  e.restart_from_equilibrium = true;
  EXPECT_EQ(to_json(ergodicity_params_from_json(to_json(e))), to_json(e));
}

TEST(Params, UnknownKeysAreRejected) {
  Json j = to_json(CouplingParams{});
  j["bogus"] = 1;
  EXPECT_EQ(code_of([&] { coupling_params_from_json(j); }), ErrorCode::InvalidArgument);
  Json e = to_json(ErgodicityParams{});
  e["model"]["bogus"] = 1;
  EXPECT_EQ(code_of([&] { ergodicity_params_from_json(e); }), ErrorCode::InvalidArgument);
}

}  // namespace
}  // namespace kel
