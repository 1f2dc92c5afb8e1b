#pragma once

#include <optional>
#include <vector>

#include "kel/fit.hpp"
#include "kel/linalg.hpp"
#include "kel/model.hpp"

namespace kel {

// State the frozen (noise-free) trajectory starts from at time 0. Without
// one, the flow is taken along the origin.
struct FrozenTrajectory {
  Vec x0;
};

// Solves dK/dtau = (A + grad_1 b(X_tau)) K on [s, t], K(s) = I.
Mat flow_K(const BlockModel& model, double t, double s,
           const std::optional<FrozenTrajectory>& along = std::nullopt);

// ||A|| + sup over probe states of ||grad_1 b||, the exponential growth
// rate bounding ||K_{t,s}||.
double flow_growth_bound(const BlockModel& model, const ProbePlan& plan = {});

struct GramianResult {
  Mat Q;
  double t = 0.0;
  double s = 0.0;
  double lambda_min = 0.0;
  int nodes = 0;
};

// Q = int_0^s r (t - r) / t^2 K_{t,r} B B^T K_{t,r}^T dr by Gauss-Legendre.
GramianResult gramian_Q(const BlockModel& model, double t, double s, int nodes = 64,
                        const std::optional<FrozenTrajectory>& along = std::nullopt);

struct ScalingResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int expected_exponent = 0;  // 2 (k + 1)
  // Largest c0 with lambda_min >= c0 s^{2(k+1)} / t on the grid.
  double c0 = 0.0;
  std::vector<double> s;
  std::vector<double> lambda_min;
  std::vector<double> margins;
};

// Throws NotPositiveDefinite if some lambda_min <= 0.
ScalingResult verify_gramian_scaling(const BlockModel& model, double t,
                                     const std::vector<double>& s_grid, int nodes = 64);

}  // namespace kel
