#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kel/linalg.hpp"

namespace kel {

// Uniformly weighted point cloud, one point per row.
struct DiscreteCloud {
  RowMat points;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

enum class Estimator { ExactAssignment, Sinkhorn, GaussianClosedForm, KnnKl, DvLowerBound };
std::string to_string(Estimator e);

struct DivergenceEstimate {
  double value = 0.0;
  Estimator estimator = Estimator::ExactAssignment;
  std::optional<double> uncertainty;
  std::map<std::string, double> metadata;
  std::vector<Eigen::Index> matching;  // exact assignment only: X row i -> Y row matching[i]
  bool converged = true;
};

// Squared ground cost (x-y)^T M (x-y); M = I for the Euclidean cost.
struct GroundCost {
  std::optional<Mat> form;

  static GroundCost euclidean() { return {}; }
  static GroundCost twisted(double beta, const Mat& B);
  double operator()(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& y) const;
};

RowMat cost_matrix(const DiscreteCloud& x, const DiscreteCloud& y, const GroundCost& cost);

inline constexpr Eigen::Index kExactCap = 2048;

// Throws TooLarge above `cap` points.
DivergenceEstimate w2_exact(const DiscreteCloud& x, const DiscreteCloud& y,
                            const GroundCost& cost = GroundCost::euclidean(),
                            Eigen::Index cap = kExactCap);

struct SinkhornOptions {
  int max_iters = 5000;  // per annealing stage
  double tol = 1e-4;     // L1 marginal violation
  int stages = 4;        // geometric schedule from the median cost down to epsilon
  bool debias = true;
};

// Entropic transport between two clouds for a fixed epsilon.
struct EntropicPlan {
  double dual_value = 0.0;    // <a,f> + <b,g>
  double primal_cost = 0.0;   // <P, C>
  double marginal_error = 0.0;
  int iterations = 0;
  bool converged = false;
  Vec f;
  Vec g;
};

EntropicPlan sinkhorn_plan(const RowMat& cost, double epsilon, const SinkhornOptions& options,
                           const Vec* f_init = nullptr, const Vec* g_init = nullptr);

// Annealed log-domain Sinkhorn; with debias the value is
// sqrt(max(0, OT(x,y) - OT(x,x)/2 - OT(y,y)/2)). An unconverged solve
// returns its last iterate with converged = false.
DivergenceEstimate w2_sinkhorn(const DiscreteCloud& x, const DiscreteCloud& y, double epsilon,
                               const SinkhornOptions& options = {},
                               const GroundCost& cost = GroundCost::euclidean());

// Median of the pairwise cost matrix.
double median_cost(const DiscreteCloud& x, const DiscreteCloud& y,
                   const GroundCost& cost = GroundCost::euclidean());

// Standard deviation of the W2 estimate over resamples with replacement of
// both clouds; the resampled value uses w2_exact.
double w2_bootstrap_stderr(const DiscreteCloud& x, const DiscreteCloud& y, int resamples,
                           std::uint64_t seed, const GroundCost& cost = GroundCost::euclidean());

// Exact below the cap, annealed Sinkhorn above; attaches a bootstrap
// standard error when `resamples` > 0.
DivergenceEstimate w2_auto(const DiscreteCloud& x, const DiscreteCloud& y, int resamples,
                           std::uint64_t seed, const GroundCost& cost = GroundCost::euclidean());

}  // namespace kel
