#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kel/fit.hpp"
#include "kel/gaussian.hpp"
#include "kel/json_util.hpp"
#include "kel/model.hpp"
#include "kel/model_spec.hpp"
#include "kel/sde.hpp"

namespace kel {

struct Record {
  double t = 0.0;
  std::string quantity;
  double value = 0.0;
  std::optional<double> stderr_;
};

struct ExperimentReport {
  std::string id;
  Json config;  // fully resolved; replaying it reproduces the report
  std::vector<double> t_grid;
  std::vector<Record> records;
  std::map<std::string, FitResult> fits;
  std::map<std::string, double> scalars;
  std::map<std::string, bool> flags;
  std::vector<std::string> notes;
  std::uint64_t seed = 0;
  // Kept out of serialized artifacts so reruns are byte-identical.
  double wall_clock_seconds = 0.0;

  void add(double t, std::string quantity, double value,
           std::optional<double> stderr_value = std::nullopt);
  std::vector<std::pair<double, double>> series(const std::string& quantity) const;
};

// ---- entropy bound between two models ----------------------------------------

inline ProbePlan bound_grid() {
  ProbePlan plan;
  plan.n_states = 256;
  plan.n_directions = 0;
  return plan;
}

inline ModelSpec granular_spec() {
  ModelSpec spec;
  spec.preset = "granular";
  return spec;
}

struct BoundOptions {
  int quad_nodes = 64;
  // Lower integration limit; must be positive when the diffusions differ.
  double t0 = 0.0;
  // Spatial probes for the sup-norms (the origin is always included).
  ProbePlan grid = bound_grid();
  // Multiplicative constant of xi_s = c s^{-2k-1/2} (or s^{-2k-3/2}).
  double xi_constant = 1.0;
};

// 1/4 int_t0^t (||a2^{-1/2}(Z1 - Z2)||_{s,inf} + xi_s sum_j ||a2^{-1/2}(a1 - a2) e_j||_{s,inf})^2 ds
// with a = sigma sigma^T / 2. Throws DriftDifferenceOutsideRange when the
// drift difference leaves the range of a2^{1/2}.
double entropy_bound_rhs(const BlockModel& model_1, const BlockModel& model_2, double t,
                           const BoundOptions& options = {});

// Exact Gaussian KL(P^1_t | P^2_t) from a common initial Gaussian against the
// bound, per grid time. Records: exact_kl, bound, margin (= bound - KL), ratio.
ExperimentReport verify_entropy_inequality_gaussian(const ModelSpec& model_1,
                                                    const ModelSpec& model_2,
                                                    const GaussianState& initial,
                                                    const std::vector<double>& t_grid,
                                                    const BoundOptions& options = {});

// Log-log slope of the exact kernel KL between starts x and y, against
// -(4k + 3) with k the Kalman index.
ExperimentReport shorttime_scaling(const ModelSpec& model, const Vec& x, const Vec& y,
                                   const std::vector<double>& t_grid);

struct CouplingParams {
  ModelSpec model = granular_spec();
  InitialPair init;
  Eigen::Index n = 4096;
  double h = 1e-3;
  double T = 20.0;
  double snapshot_every = 0.5;
  double burn_in_fraction = 0.1;
  double safety = 0.9;
  std::uint64_t seed = 20240611;
  bool replay_check = true;
};

// Synchronous coupling of the granular particle system. Pass flag: fitted
// decay rate of E[psi_bar^2] >= 2 * safety * kappa. Throws DegenerateSeries
// when the coupled difference vanishes identically.
ExperimentReport coupling_contraction(const CouplingParams& params);

struct ErgodicityParams {
  ModelSpec model = granular_spec();
  InitialLaw start = InitialLaw::point_mass(Vec::Zero(2));
  Eigen::Index n = 1024;  // exact W2 at every grid point
  double h = 1e-3;
  double T = 20.0;
  double snapshot_every = 0.5;
  double burn_in_fraction = 0.1;
  double safety = 0.8;
  int knn_k = 5;
  int bootstrap_resamples = 20;
  // Ratio to the noise floor for the stationarity audit.
  double stationarity_tolerance = 1.5;
  // Fits keep W2^2 values above floor_multiple * floor^2 and KL values above
  // floor_multiple standard errors.
  double floor_multiple = 10.0;
  // Restart from the terminal ensemble instead of `start`.
  bool restart_from_equilibrium = false;
  std::uint64_t seed = 20240611;
};

// Decay of W2(mu_t, mu_bar) and of the k-NN KL estimate toward the terminal
// ensemble mu_bar. When the audit fails the report carries stationary=false
// and no fits.
ExperimentReport ergodicity_experiment(const ErgodicityParams& params);

Json to_json(const CouplingParams& p);
CouplingParams coupling_params_from_json(const Json& j);
Json to_json(const ErgodicityParams& p);
ErgodicityParams ergodicity_params_from_json(const Json& j);

}  // namespace kel
