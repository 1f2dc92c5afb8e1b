#pragma once

#include <vector>

#include "kel/linalg.hpp"
#include "kel/model.hpp"

namespace kel {

struct GaussianState {
  Vec mean;
  Mat cov;

  static GaussianState point(const Vec& x) { return {x, Mat::Zero(x.size(), x.size())}; }
};

// RK4 on dm/ds = F m + u, dS/ds = F S + S F^T + G G^T.
GaussianState propagate_linear(const Mat& F, const Mat& G, const Vec& u, const GaussianState& init,
                               double t, double substeps_per_unit = 1e4);

// Law at time t of a linear BlockModel started from `init`.
GaussianState propagate_model(const BlockModel& model, const GaussianState& init, double t,
                              double substeps_per_unit = 1e4);

struct KlDetail {
  double value = 0.0;
  // Condition number of the reference covariance after diagonal equilibration.
  double condition = 1.0;
  bool near_cap = false;
};

// KL(p || q). The reference covariance is rescaled to unit diagonal first, so
// hypoelliptic covariances whose blocks live on different scales are accepted.
// Throws SingularReference above the 1e12 condition cap.
KlDetail gaussian_kl_detail(const GaussianState& p, const GaussianState& q,
                            double condition_cap = 1e12);
double gaussian_kl(const GaussianState& p, const GaussianState& q);

double gaussian_w2(const GaussianState& p, const GaussianState& q);

struct CurvePoint {
  double t = 0.0;
  double kl = 0.0;
  bool valid = true;  // false when the kernel covariance hit the condition cap
};

// Exact KL between the laws at t of the model started from x and from y.
std::vector<CurvePoint> entropy_cost_curve(const BlockModel& model, const Vec& x, const Vec& y,
                                           const std::vector<double>& t_grid);

}  // namespace kel
