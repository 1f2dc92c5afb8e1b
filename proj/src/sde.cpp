#include "kel/sde.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "kel/error.hpp"
#include "kel/parallel.hpp"
#include "kel/rng.hpp"
#include "kel/transport.hpp"

namespace kel {

namespace {

// Per-step offset in a particle's Philox lane; leaves room for 2^16 blocks
// (2^17 normals) per particle per step.
constexpr int kStepShift = 16;

void fill_step_noise(const Ensemble& ens, int d2, RowMat& xi) {
  xi.resize(ens.size(), d2);
  parallel_for(ens.size(), [&](std::int64_t i) {
    CounterRng rng(ens.seed, StreamTag::Step, static_cast<std::uint64_t>(i),
                   ens.counters[i] << kStepShift);
    for (int j = 0; j < d2; ++j) xi(i, j) = rng.normal();
  });
}

struct StepScratch {
  RowMat drift;
  RowMat xi;
  RowMat subsample;
};

void apply_step(const BlockModel& model, Ensemble& ens, double h, const RowMat& xi,
                const StepOptions& options, StepScratch& scratch) {
  const Eigen::Index n = ens.size();
  MeasureSummary mu = summarize(ens.states);
  if (model.mean_field && !model.mean_field->grad_W_affine_in_z) {
    if (n <= options.pairwise_cap) {
      mu.particles = &ens.states;
    } else {
      const Eigen::Index m = std::min<Eigen::Index>(options.pairwise_subsample, n);
      const Eigen::Index stride = n / m;
      scratch.subsample.resize(m, ens.states.cols());
      for (Eigen::Index j = 0; j < m; ++j) scratch.subsample.row(j) = ens.states.row(j * stride);
      mu.particles = &scratch.subsample;
    }
  }
  const Mat sigma = model.diffusion(ens.time, &mu);
  model.drift_all(ens.time, ens.states, &mu, scratch.drift);
  const double sqrt_h = std::sqrt(h);
  const int d2 = model.d2;
  const Mat noise_map = (sqrt_h * sigma).transpose();
  ens.states.noalias() += h * scratch.drift;
  ens.states.rightCols(d2).noalias() += xi * noise_map;
  if (!ens.states.allFinite()) {
    fail(ErrorCode::NonFiniteState,
         "non-finite coordinate after step at t=" + std::to_string(ens.time + h));
  }
  for (auto& c : ens.counters) ++c;
  ens.time += h;
}

void check_dims(const BlockModel& model, const Ensemble& ens) {
  require(ens.states.cols() == model.dim(), "ensemble dimension does not match model");
  require(static_cast<Eigen::Index>(ens.counters.size()) == ens.size(),
          "ensemble counters do not match particle count");
}

}  // namespace

MeasureSummary summarize(const RowMat& states) {
  MeasureSummary mu;
  const Eigen::Index n = states.rows();
  mu.mean = Vec::Zero(states.cols());
  mu.cov = Mat::Zero(states.cols(), states.cols());
  if (n == 0) return mu;
  // fixed summation order
  for (Eigen::Index i = 0; i < n; ++i) mu.mean += states.row(i).transpose();
  mu.mean /= static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec c = states.row(i).transpose() - mu.mean;
    mu.cov.noalias() += c * c.transpose();
  }
  mu.cov /= static_cast<double>(n);
  return mu;
}

void step_in_place(const BlockModel& model, Ensemble& ens, double h, const StepOptions& options) {
  require(h > 0.0, "step size must be positive");
  check_dims(model, ens);
  StepScratch scratch;
  fill_step_noise(ens, model.d2, scratch.xi);
  apply_step(model, ens, h, scratch.xi, options, scratch);
}

Ensemble step(const BlockModel& model, const Ensemble& ens, double h, const StepOptions& options) {
  Ensemble next = ens;
  step_in_place(model, next, h, options);
  return next;
}

InitialLaw InitialLaw::point_mass(Vec x) {
  InitialLaw law;
  law.kind = Kind::PointMass;
  law.point = std::move(x);
  return law;
}

InitialLaw InitialLaw::gaussian(Vec mean, Mat cov) {
  InitialLaw law;
  law.kind = Kind::Gaussian;
  law.point = std::move(mean);
  law.cov = std::move(cov);
  return law;
}

InitialLaw InitialLaw::explicit_states(RowMat states) {
  InitialLaw law;
  law.kind = Kind::Explicit;
  law.states = std::move(states);
  return law;
}

RowMat sample_initial(const InitialLaw& law, Eigen::Index n, std::uint64_t seed, StreamTag tag) {
  require(n > 0, "ensemble size must be positive");
  switch (law.kind) {
    case InitialLaw::Kind::PointMass: {
      RowMat out(n, law.point.size());
      out.rowwise() = law.point.transpose();
      return out;
    }
    case InitialLaw::Kind::Gaussian: {
      const Eigen::Index d = law.point.size();
      require(law.cov.rows() == d && law.cov.cols() == d, "Gaussian covariance has wrong shape");
      const Mat root = sym_sqrt(law.cov);
      RowMat out(n, d);
      parallel_for(n, [&](std::int64_t i) {
        CounterRng rng(seed, tag, static_cast<std::uint64_t>(i));
        Vec z(d);
        for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.normal();
        out.row(i) = (law.point + root * z).transpose();
      });
      return out;
    }
    case InitialLaw::Kind::Explicit:
      require(law.states.rows() == n, "explicit initial states do not match N");
      return law.states;
  }
  return {};
}

Ensemble make_ensemble(RowMat states, std::uint64_t seed) {
  Ensemble ens;
  ens.counters.assign(states.rows(), 0);
  ens.states = std::move(states);
  ens.seed = seed;
  return ens;
}

std::vector<std::int64_t> grid_steps(const std::vector<double>& t_grid, double h) {
  require(h > 0.0, "step size must be positive");
  if (t_grid.empty()) fail(ErrorCode::GridMismatch, "empty time grid");
  std::vector<std::int64_t> steps;
  steps.reserve(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    if (t < 0.0 || (i > 0 && t <= t_grid[i - 1])) {
      fail(ErrorCode::GridMismatch, "time grid must be nonnegative and strictly increasing");
    }
    const double k = std::round(t / h);
    if (std::abs(t - k * h) > 1e-12 * std::max(1.0, t)) {
      fail(ErrorCode::GridMismatch, "t=" + std::to_string(t) + " is not a multiple of h");
    }
    steps.push_back(static_cast<std::int64_t>(k));
  }
  return steps;
}

std::vector<Ensemble> simulate_from(const BlockModel& model, Ensemble ens, double h,
                                    const std::vector<double>& t_grid,
                                    const StepOptions& options) {
  check_dims(model, ens);
  const std::int64_t start = static_cast<std::int64_t>(std::llround(ens.time / h));
  std::vector<double> shifted(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) shifted[i] = t_grid[i] - start * h;
  if (!t_grid.empty() && t_grid.front() < ens.time - 1e-12) {
    fail(ErrorCode::GridMismatch, "time grid starts before the ensemble time");
  }
  for (double& t : shifted) t = std::max(t, 0.0);
  const std::vector<std::int64_t> steps = grid_steps(shifted, h);

  std::vector<Ensemble> out;
  out.reserve(t_grid.size());
  StepScratch scratch;
  std::int64_t done = 0;
  const double t0 = ens.time;
  for (std::size_t g = 0; g < steps.size(); ++g) {
    while (done < steps[g]) {
      fill_step_noise(ens, model.d2, scratch.xi);
      apply_step(model, ens, h, scratch.xi, options, scratch);
      ++done;
      // time from the step count, so snapshots land exactly on the grid
      ens.time = t0 + static_cast<double>(done) * h;
    }
    out.push_back(ens);
    out.back().time = t_grid[g];
  }
  return out;
}

std::vector<Ensemble> simulate(const BlockModel& model, const InitialLaw& init, Eigen::Index n,
                               double h, const std::vector<double>& t_grid, std::uint64_t seed,
                               const StepOptions& options) {
  model.validate();
  Ensemble ens = make_ensemble(sample_initial(init, n, seed, StreamTag::InitX), seed);
  return simulate_from(model, std::move(ens), h, t_grid, options);
}

CoupledEnsemble couple_initial(const InitialPair& init, Eigen::Index n, std::uint64_t seed) {
  RowMat x0 = sample_initial(init.x, n, seed, StreamTag::InitX);
  RowMat y0;
  switch (init.coupling) {
    case CouplingKind::SamePoint:
      y0 = x0;
      break;
    case CouplingKind::Independent:
      y0 = sample_initial(init.y, n, seed, StreamTag::InitY);
      break;
    case CouplingKind::ComonotoneByIndex: {
      y0 = sample_initial(init.y, n, seed, StreamTag::InitY);
      // Rank-match on the first coordinate.
      std::vector<Eigen::Index> ix(n), iy(n);
      std::iota(ix.begin(), ix.end(), 0);
      std::iota(iy.begin(), iy.end(), 0);
      std::stable_sort(ix.begin(), ix.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return x0(a, 0) < x0(b, 0); });
      std::stable_sort(iy.begin(), iy.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return y0(a, 0) < y0(b, 0); });
      RowMat matched(n, y0.cols());
      for (Eigen::Index k = 0; k < n; ++k) matched.row(ix[k]) = y0.row(iy[k]);
      y0 = std::move(matched);
      break;
    }
    case CouplingKind::Optimal: {
      y0 = sample_initial(init.y, n, seed, StreamTag::InitY);
      const DivergenceEstimate est =
          w2_exact(DiscreteCloud{x0}, DiscreteCloud{y0}, GroundCost::euclidean());
      RowMat matched(n, y0.cols());
      for (Eigen::Index k = 0; k < n; ++k) matched.row(k) = y0.row(est.matching[k]);
      y0 = std::move(matched);
      break;
    }
  }
  require(x0.cols() == y0.cols(), "coupled initial laws differ in dimension");
  CoupledEnsemble pair;
  pair.x = make_ensemble(std::move(x0), seed);
  pair.y = make_ensemble(std::move(y0), seed);
  return pair;
}

bool shares_noise(const CoupledEnsemble& pair) {
  return pair.x.seed == pair.y.seed && pair.x.counters == pair.y.counters;
}

bool identical(const Ensemble& a, const Ensemble& b) {
  if (a.states.rows() != b.states.rows() || a.states.cols() != b.states.cols()) return false;
  if (a.seed != b.seed || a.counters != b.counters) return false;
  if (std::memcmp(&a.time, &b.time, sizeof(double)) != 0) return false;
  return std::memcmp(a.states.data(), b.states.data(),
                     sizeof(double) * static_cast<std::size_t>(a.states.size())) == 0;
}

namespace {

void pair_statistics(CoupledSnapshot& snap, const std::optional<TwistSpec>& twist) {
  const RowMat diff = snap.pair.x.states - snap.pair.y.states;
  const Eigen::Index n = diff.rows();
  double xi_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) xi_sq += diff.row(i).squaredNorm();
  snap.mean_xi_sq = xi_sq / static_cast<double>(n);
  if (twist) {
    const Mat form = twisted_quadratic_form(twist->beta, twist->B);
    double psi_sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec v = diff.row(i).transpose();
      psi_sq += std::max(0.0, v.dot(form * v));
    }
    snap.mean_psi_bar_sq = psi_sq / static_cast<double>(n);
  } else {
    snap.mean_psi_bar_sq = snap.mean_xi_sq;
  }
}

}  // namespace

std::vector<CoupledSnapshot> couple_simulate(const BlockModel& model_x, const BlockModel& model_y,
                                             const InitialPair& init, Eigen::Index n, double h,
                                             const std::vector<double>& t_grid,
                                             std::uint64_t seed,
                                             const std::optional<TwistSpec>& twist_in,
                                             const StepOptions& options) {
  model_x.validate();
  model_y.validate();
  require(model_x.d1 == model_y.d1 && model_x.d2 == model_y.d2,
          "coupled models must share block dimensions");
  std::optional<TwistSpec> twist = twist_in;
  if (!twist && model_x.mean_field && model_x.d1 == model_x.d2) {
    twist = TwistSpec{model_x.mean_field->beta, model_x.B};
  }
  const std::vector<std::int64_t> steps = grid_steps(t_grid, h);
  CoupledEnsemble pair = couple_initial(init, n, seed);
  check_dims(model_x, pair.x);
  check_dims(model_y, pair.y);

  std::vector<CoupledSnapshot> out;
  out.reserve(t_grid.size());
  StepScratch sx;
  StepScratch sy;
  std::int64_t done = 0;
  for (std::size_t g = 0; g < steps.size(); ++g) {
    while (done < steps[g]) {
      if (!shares_noise(pair)) fail(ErrorCode::InvalidArgument, "coupled streams diverged");
      fill_step_noise(pair.x, model_x.d2, sx.xi);
      apply_step(model_x, pair.x, h, sx.xi, options, sx);
      apply_step(model_y, pair.y, h, sx.xi, options, sy);
      ++done;
      pair.x.time = pair.y.time = static_cast<double>(done) * h;
    }
    CoupledSnapshot snap;
    snap.t = t_grid[g];
    snap.pair = pair;
    snap.pair.x.time = snap.pair.y.time = t_grid[g];
    pair_statistics(snap, twist);
    out.push_back(std::move(snap));
  }
  return out;
}

}  // namespace kel
