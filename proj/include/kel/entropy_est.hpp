#pragma once

#include <cstdint>
#include <vector>

#include "kel/linalg.hpp"
#include "kel/transport.hpp"

namespace kel {

// log f(x) = x^T Q x + l^T x + c.
struct QuadraticTestFunction {
  Mat Q;
  Vec l;
  double c = 0.0;

  static QuadraticTestFunction constant_one(int d) { return {Mat::Zero(d, d), Vec::Zero(d), 0.0}; }
  double log_f(const Eigen::Ref<const Vec>& x) const { return x.dot(Q * x) + l.dot(x) + c; }
};

// Two-sample k-nearest-neighbour KL(P || Q) estimate, clipped at 0. Exact
// duplicates are jittered by 1e-12 and counted in metadata["jittered"].
DivergenceEstimate knn_kl(const RowMat& p_samples, const RowMat& q_samples, int k = 5);

// Estimates for several k from one neighbour pass (ks ascending).
std::vector<DivergenceEstimate> knn_kl_multi(const RowMat& p_samples, const RowMat& q_samples,
                                             const std::vector<int>& ks);

// Per-sample terms d*ln(nu_k/rho_k); their mean plus ln(M/(N-1)) is the estimate.
Vec knn_kl_terms(const RowMat& p_samples, const RowMat& q_samples, int k);

// mean_P[log f] - log mean_Q[f].
double dv_objective(const RowMat& p_samples, const RowMat& q_samples,
                    const QuadraticTestFunction& f);

enum class DvFamily { Linear, Quadratic };

struct DvOptions {
  DvFamily family = DvFamily::Quadratic;
  int evaluation_budget = 6000;
  int restarts = 3;
  int bootstrap_resamples = 20;
  std::uint64_t seed = 1;
};

// Donsker-Varadhan lower bound over the quadratic family. The curvature is
// restricted so that f stays integrable against a Gaussian with the
// reference sample covariance. Never negative (f = 1 is always admissible).
DivergenceEstimate dv_lower_bound(const RowMat& p_samples, const RowMat& q_samples,
                                  const DvOptions& options = {},
                                  QuadraticTestFunction* best = nullptr);

}  // namespace kel
