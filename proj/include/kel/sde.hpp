#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kel/linalg.hpp"
#include "kel/model.hpp"
#include "kel/rng.hpp"

namespace kel {

struct Ensemble {
  RowMat states;  // N x (d1 + d2)
  double time = 0.0;
  std::uint64_t seed = 0;
  // Steps already consumed by each particle's noise stream.
  std::vector<std::uint64_t> counters;

  Eigen::Index size() const { return states.rows(); }
};

struct CoupledEnsemble {
  Ensemble x;
  Ensemble y;
};

struct StepOptions {
  // Pairwise kernel averages are exact up to this ensemble size and use a
  // fixed-stride subsample above it.
  int pairwise_cap = 20000;
  int pairwise_subsample = 1024;
};

// Empirical mean and (1/N) covariance of the ensemble.
MeasureSummary summarize(const RowMat& states);

// One Euler-Maruyama step. The mean-field summary is taken from the pre-step
// ensemble; particle i draws its increment from Philox lane (seed, i, counter).
Ensemble step(const BlockModel& model, const Ensemble& ens, double h,
              const StepOptions& options = {});
void step_in_place(const BlockModel& model, Ensemble& ens, double h,
                   const StepOptions& options = {});

struct InitialLaw {
  enum class Kind { PointMass, Gaussian, Explicit };
  Kind kind = Kind::PointMass;
  Vec point;  // point mass location or Gaussian mean
  Mat cov;    // Gaussian covariance
  RowMat states;

  static InitialLaw point_mass(Vec x);
  static InitialLaw gaussian(Vec mean, Mat cov);
  static InitialLaw explicit_states(RowMat states);
};

// Draws N initial states from lane `tag` of the seed.
RowMat sample_initial(const InitialLaw& law, Eigen::Index n, std::uint64_t seed, StreamTag tag);

Ensemble make_ensemble(RowMat states, std::uint64_t seed);

// Checks the grid is strictly increasing, nonnegative, and on the h lattice;
// returns the step index of every grid time. Throws GridMismatch.
std::vector<std::int64_t> grid_steps(const std::vector<double>& t_grid, double h);

std::vector<Ensemble> simulate(const BlockModel& model, const InitialLaw& init, Eigen::Index n,
                               double h, const std::vector<double>& t_grid, std::uint64_t seed,
                               const StepOptions& options = {});

// Continues an existing ensemble; t_grid times are absolute.
std::vector<Ensemble> simulate_from(const BlockModel& model, Ensemble ens, double h,
                                    const std::vector<double>& t_grid,
                                    const StepOptions& options = {});

enum class CouplingKind { SamePoint, Independent, ComonotoneByIndex, Optimal };

struct InitialPair {
  InitialLaw x;
  InitialLaw y;
  CouplingKind coupling = CouplingKind::Independent;
};

// Twisted metric parameters used for the per-snapshot E[psi_bar^2].
struct TwistSpec {
  double beta = 1.0;
  Mat B;
};

struct CoupledSnapshot {
  double t = 0.0;
  CoupledEnsemble pair;
  double mean_psi_bar_sq = 0.0;
  double mean_xi_sq = 0.0;
};

// Builds the coupled initial ensembles. Optimal pairing uses the exact
// assignment solver and requires N <= 2048.
CoupledEnsemble couple_initial(const InitialPair& init, Eigen::Index n, std::uint64_t seed);

// Synchronous coupling: both margins consume identical increments.
std::vector<CoupledSnapshot> couple_simulate(const BlockModel& model_x, const BlockModel& model_y,
                                             const InitialPair& init, Eigen::Index n, double h,
                                             const std::vector<double>& t_grid,
                                             std::uint64_t seed,
                                             const std::optional<TwistSpec>& twist = std::nullopt,
                                             const StepOptions& options = {});

// True when both margins have the same seed and counters, i.e. the next step
// draws identical increments.
bool shares_noise(const CoupledEnsemble& pair);

// Bitwise equality of states, time, seed and counters.
bool identical(const Ensemble& a, const Ensemble& b);

}  // namespace kel
