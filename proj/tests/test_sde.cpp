#include <gtest/gtest.h>

#include <cmath>

#include "kel/error.hpp"
#include "kel/model.hpp"
#include "kel/parallel.hpp"
#include "kel/sde.hpp"
#include "support.hpp"

namespace kel {
namespace {

// d1 = d2 = 1 with a chosen drift and no noise.
BlockModel noiseless(Mat b, std::function<Vec(double, const Vec&, const MeasureSummary*)> z) {
  BlockModel m;
  m.name = "noiseless";
  m.A = Mat::Zero(1, 1);
  m.B = std::move(b);
  m.Z = std::move(z);
  m.sigma = [](double, const MeasureSummary*) -> Mat { return Mat::Zero(1, 1); };
  m.nondegenerate_noise = false;
  return m;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::InvalidArgument;
}

TEST(Step, FrozenModelOnlyAdvancesTime) {
  const BlockModel m = noiseless(Mat::Zero(1, 1), nullptr);
  Ensemble e = make_ensemble(test::normal_cloud(10, 2, 1, 0), 3);
  const Ensemble next = step(m, e, 0.01);
  EXPECT_EQ(next.states, e.states);
  EXPECT_DOUBLE_EQ(next.time, 0.01);
  EXPECT_EQ(next.counters[0], 1u);
}

TEST(Step, RotationConservesRadius) {
  const BlockModel m = noiseless(Mat::Identity(1, 1), [](double, const Vec& x, const MeasureSummary*) -> Vec {
    return Vec::Constant(1, -x(0));
  });
  RowMat x0(1, 2);
  x0 << 1.0, 0.0;
  Ensemble e = make_ensemble(x0, 0);
  for (int i = 0; i < 10000; ++i) step_in_place(m, e, 1e-4);
  EXPECT_NEAR(e.time, 1.0, 1e-9);
  EXPECT_LE(std::abs(e.states.row(0).squaredNorm() - 1.0), 1e-3);
  EXPECT_NEAR(e.states(0, 0), std::cos(1.0), 1e-3);
}

TEST(Step, PureNoiseVarianceGrowsLinearly) {
  BlockModel m = noiseless(Mat::Zero(1, 1), nullptr);
  m.sigma = [](double, const MeasureSummary*) -> Mat { return Mat::Constant(1, 1, std::sqrt(2.0)); };
  m.nondegenerate_noise = true;
  const auto snaps = simulate(m, InitialLaw::point_mass(Vec::Zero(2)), 100000, 0.01, {0.0, 0.5}, 17);
  const double var = sample_covariance(snaps.back().states)(1, 1);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Step, NonFiniteStateIsReported) {
  const BlockModel m = noiseless(Mat::Identity(1, 1), [](double, const Vec& x, const MeasureSummary*) -> Vec {
    return Vec::Constant(1, 1e300 * x(1));
  });
  RowMat x0(1, 2);
  x0 << 0.0, 1e10;
  Ensemble e = make_ensemble(x0, 0);
  EXPECT_EQ(code_of([&] { step_in_place(m, e, 1.0); }), ErrorCode::NonFiniteState);
}

TEST(Simulate, GridOfZeroReturnsInitialEnsemble) {
  const auto snaps = simulate(kinetic_ou(1), InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2)), 20,
                              1e-3, {0.0}, 5);
  ASSERT_EQ(snaps.size(), 1u);
  EXPECT_EQ(snaps[0].time, 0.0);
  EXPECT_EQ(snaps[0].states, sample_initial(InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2)), 20, 5,
                                            StreamTag::InitX));
}

TEST(Simulate, GridMismatch) {
  const auto init = InitialLaw::point_mass(Vec::Zero(2));
  EXPECT_EQ(code_of([&] { simulate(kinetic_ou(1), init, 4, 1e-3, {0.0, 0.0015}, 1); }),
            ErrorCode::GridMismatch);
  EXPECT_EQ(code_of([&] { simulate(kinetic_ou(1), init, 4, 1e-3, {0.2, 0.1}, 1); }), ErrorCode::GridMismatch);
  EXPECT_EQ(code_of([&] { simulate(kinetic_ou(1), init, 4, 1e-3, {}, 1); }), ErrorCode::GridMismatch);
  EXPECT_EQ(grid_steps({0.0, 0.1, 0.3}, 1e-3), (std::vector<std::int64_t>{0, 100, 300}));
}

TEST(Simulate, KineticOuMomentsMatchGaussianLaw) {
  const auto snaps = simulate(kinetic_ou(1), InitialLaw::point_mass(Vec::Zero(2)), 100000, 1e-3, {1.0}, 23);
  const RowMat& x = snaps.back().states;
  Mat f(2, 2);
  f << 0, 1, -1, -1;
  Mat g(2, 1);
  g << 0, std::sqrt(2.0);
  const Mat sigma = test::van_loan_covariance(f, g, 1.0);
  const Mat cov = sample_covariance(x);
  const double n = static_cast<double>(x.rows());
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(sample_mean(x)(i), 0.0, 3.0 * std::sqrt(sigma(i, i) / n));
    for (int j = 0; j < 2; ++j) {
      const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / n);
      EXPECT_NEAR(cov(i, j), sigma(i, j), 3.0 * se) << i << "," << j;
    }
  }
}

// E|X_1|^2 from a far start: the squared-mean part dominates the Monte
// Carlo noise, so the Euler bias is visible.
TEST(Simulate, WeakOrderAtLeastOne) {
  Mat f(2, 2);
  f << 0, 1, -1, -1;
  Mat g(2, 1);
  g << 0, std::sqrt(2.0);
  Vec x0(2);
  x0 << 1000.0, 0.0;
  const Vec m = test::expm(f) * x0;
  const double exact = m.squaredNorm() + test::van_loan_covariance(f, g, 1.0).trace();
  std::vector<double> err;
  for (double h : {1e-2, 5e-3, 2.5e-3}) {
    const auto snaps = simulate(kinetic_ou(1), InitialLaw::point_mass(x0), 10000, h, {1.0}, 29);
    err.push_back(std::abs(snaps.back().states.rowwise().squaredNorm().mean() - exact));
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 0.9);
  EXPECT_GE(std::log2(err[1] / err[2]), 0.9);
}

TEST(Simulate, ZeroInteractionGranularTracksKineticOu) {
  GranularParams gp;
  gp.theta = 0.0;
  const auto init = InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  const auto a = simulate(granular(gp), init, 256, 1e-3, {0.0, 0.5}, 31);
  const auto b = simulate(kinetic_ou(1), init, 256, 1e-3, {0.0, 0.5}, 31);
  EXPECT_LE((a.back().states - b.back().states).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Simulate, BitIdenticalAcrossThreadCounts) {
  GranularParams gp;
  gp.theta = 0.1;
  gp.alpha = 0.05;
  gp.b_amplitude = 0.1;
  const auto init = InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  const int saved = threads();
  set_threads(1);
  const auto one = simulate(granular(gp), init, 777, 1e-3, {0.0, 0.2}, 37);
  set_threads(4);
  const auto four = simulate(granular(gp), init, 777, 1e-3, {0.0, 0.2}, 37);
  set_threads(saved);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_TRUE(identical(one[i], four[i]));
}

TEST(Simulate, PairwiseKernelPathIsThreadInvariant) {
  GranularParams gp;
  gp.theta = 0.1;
  BlockModel m = granular(gp);
  m.mean_field->grad_W_affine_in_z = false;
  m.batch_drift = nullptr;
  const auto init = InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  StepOptions opt;
  opt.pairwise_cap = 100;
  opt.pairwise_subsample = 32;
  const int saved = threads();
  set_threads(1);
  const auto one = simulate(m, init, 300, 1e-2, {0.0, 0.1}, 41, opt);
  set_threads(3);
  const auto three = simulate(m, init, 300, 1e-2, {0.0, 0.1}, 41, opt);
  set_threads(saved);
  EXPECT_TRUE(identical(one.back(), three.back()));
}

TEST(Simulate, ReplayFromCountersIsIdentical) {
  const auto init = InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  const auto full = simulate(kinetic_ou(1), init, 64, 1e-3, {0.0, 0.1, 0.2}, 43);
  const auto resumed = simulate_from(kinetic_ou(1), full[1], 1e-3, {0.2});
  EXPECT_TRUE(identical(full[2], resumed.back()));
}

TEST(Simulate, MeanFieldApproximationImprovesWithN) {
  GranularParams gp;
  gp.theta = 0.5;
  gp.alpha = 0.3;
  const BlockModel m = granular(gp);
  Vec start(2);
  start << 3.0, 0.0;
  const auto init = InitialLaw::gaussian(start, Mat::Identity(2, 2));
  const std::vector<double> grid = test::linspace(0.0, 2.0, 11);
  auto mean_path = [&](Eigen::Index n, std::uint64_t seed) {
    std::vector<double> path;
    for (const Ensemble& e : simulate(m, init, n, 1e-2, grid, seed)) path.push_back(e.states.col(0).mean());
    return path;
  };
  const auto reference = mean_path(100000, 101);
  auto distance = [&](const std::vector<double>& p) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(p[i] - reference[i]));
    return worst;
  };
  EXPECT_LT(distance(mean_path(10000, 102)), distance(mean_path(1000, 103)));
}

TEST(Couple, IdenticalSystemsStayTogether) {
  InitialPair pair;
  pair.x = InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  pair.y = pair.x;
  pair.coupling = CouplingKind::SamePoint;
  GranularParams gp;
  const auto snaps = couple_simulate(granular(gp), granular(gp), pair, 128, 1e-3, {0.0, 0.5, 1.0}, 47);
  for (const CoupledSnapshot& s : snaps) {
    EXPECT_EQ(s.mean_xi_sq, 0.0);
    EXPECT_EQ(s.mean_psi_bar_sq, 0.0);
    EXPECT_TRUE(shares_noise(s.pair));
  }
}

TEST(Couple, ConstantShiftFollowsDeterministicOde) {
  const double delta = 0.5;
  const BlockModel mx = with_drift_shift(kinetic_ou(1), Vec::Constant(1, delta));
  const BlockModel my = kinetic_ou(1);
  InitialPair pair;
  pair.x = InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  pair.y = pair.x;
  pair.coupling = CouplingKind::SamePoint;
  const std::vector<double> grid{0.5, 1.0, 2.0};
  const auto snaps = couple_simulate(mx, my, pair, 64, 1e-4, grid, 53);
  Mat f(2, 2);
  f << 0, 1, -1, -1;
  Vec u(2);
  u << 0.0, delta;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    // Xi_t = F^{-1}(e^{Ft} - I) u
    const Vec xi = f.inverse() * (test::expm(f * grid[i]) - Mat::Identity(2, 2)) * u;
    EXPECT_NEAR(snaps[i].mean_xi_sq, xi.squaredNorm(), 1e-3 * xi.squaredNorm()) << grid[i];
  }
}

TEST(Couple, InitialCouplingKinds) {
  InitialPair pair;
  pair.x = InitialLaw::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
  Vec my(2);
  my << 3.0, 0.0;
  pair.y = InitialLaw::gaussian(my, 0.25 * Mat::Identity(2, 2));
  auto cost = [](const CoupledEnsemble& c) { return (c.x.states - c.y.states).rowwise().squaredNorm().mean(); };

  pair.coupling = CouplingKind::Independent;
  const CoupledEnsemble indep = couple_initial(pair, 200, 59);
  EXPECT_TRUE(shares_noise(indep));
  pair.coupling = CouplingKind::ComonotoneByIndex;
  const CoupledEnsemble como = couple_initial(pair, 200, 59);
  for (Eigen::Index i = 0; i < 200; ++i) {
    for (Eigen::Index j = 0; j < 200; ++j) {
      if (como.x.states(i, 0) < como.x.states(j, 0)) {
        EXPECT_LE(como.y.states(i, 0), como.y.states(j, 0));
      }
    }
  }
  pair.coupling = CouplingKind::Optimal;
  const CoupledEnsemble opt = couple_initial(pair, 200, 59);
  EXPECT_LE(cost(opt), cost(como) + 1e-12);
  EXPECT_LE(cost(opt), cost(indep) + 1e-12);
  EXPECT_EQ(code_of([&] { couple_initial(pair, 3000, 59); }), ErrorCode::TooLarge);
}

}  // namespace
}  // namespace kel
