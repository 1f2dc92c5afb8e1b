#include "kel/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kel/error.hpp"

namespace kel {

namespace {

struct MomentRate {
  Vec dm;
  Mat dS;
};

MomentRate moment_rate(const Mat& F, const Mat& GGt, const Vec& u, const Vec& m, const Mat& S) {
  return {F * m + u, F * S + S * F.transpose() + GGt};
}

}  // namespace

GaussianState propagate_linear(const Mat& F, const Mat& G, const Vec& u, const GaussianState& init,
                               double t, double substeps_per_unit) {
  require(t > 0.0, "propagation time must be positive");
  const Eigen::Index d = F.rows();
  require(F.cols() == d && G.rows() == d && u.size() == d, "linear SDE shapes disagree");
  require(init.mean.size() == d && init.cov.rows() == d && init.cov.cols() == d,
          "initial state dimension mismatch");
  const long n = std::max(16L, static_cast<long>(std::ceil(t * substeps_per_unit)));
  const double dt = t / static_cast<double>(n);
  const Mat GGt = G * G.transpose();
  Vec m = init.mean;
  Mat S = symmetrize(init.cov);
  for (long i = 0; i < n; ++i) {
    const MomentRate k1 = moment_rate(F, GGt, u, m, S);
    const MomentRate k2 = moment_rate(F, GGt, u, m + 0.5 * dt * k1.dm, S + 0.5 * dt * k1.dS);
    const MomentRate k3 = moment_rate(F, GGt, u, m + 0.5 * dt * k2.dm, S + 0.5 * dt * k2.dS);
    const MomentRate k4 = moment_rate(F, GGt, u, m + dt * k3.dm, S + dt * k3.dS);
    m += (dt / 6.0) * (k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm);
    S += (dt / 6.0) * (k1.dS + 2.0 * k2.dS + 2.0 * k3.dS + k4.dS);
    S = symmetrize(S);
  }
  return {m, S};
}

GaussianState propagate_model(const BlockModel& model, const GaussianState& init, double t,
                              double substeps_per_unit) {
  const LinearForm lf = linear_form(model);
  return propagate_linear(lf.F, lf.G, lf.u, init, t, substeps_per_unit);
}

KlDetail gaussian_kl_detail(const GaussianState& p, const GaussianState& q, double condition_cap) {
  const Eigen::Index d = p.mean.size();
  require(q.mean.size() == d && p.cov.rows() == d && q.cov.rows() == d,
          "Gaussian dimensions disagree");
  const Vec diag = q.cov.diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) {
    fail(ErrorCode::SingularReference, "reference covariance has a nonpositive variance");
  }
  // KL is invariant under a common linear map; unit-diagonal coordinates.
  const Vec scale = diag.array().rsqrt();
  const Mat Sq = symmetrize(scale.asDiagonal() * q.cov * scale.asDiagonal());
  const Mat Sp = symmetrize(scale.asDiagonal() * p.cov * scale.asDiagonal());
  const Vec dm = scale.asDiagonal() * (q.mean - p.mean);

  Eigen::SelfAdjointEigenSolver<Mat> eq(Sq);
  const double lo = eq.eigenvalues().minCoeff();
  const double hi = eq.eigenvalues().maxCoeff();
  KlDetail out;
  out.condition = lo > 0.0 ? hi / lo : INFINITY;
  if (!(lo > 0.0) || out.condition > condition_cap) {
    fail(ErrorCode::SingularReference,
         "reference covariance condition number " + std::to_string(out.condition) +
             " exceeds cap");
  }
  out.near_cap = out.condition > 1e-2 * condition_cap;

  Eigen::LLT<Mat> llt_q(Sq);
  const Mat Sq_inv_Sp = llt_q.solve(Sp);
  const double trace_term = Sq_inv_Sp.trace();
  const double maha = dm.dot(llt_q.solve(dm));
  double logdet_q = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) logdet_q += 2.0 * std::log(llt_q.matrixL()(i, i));
  Eigen::SelfAdjointEigenSolver<Mat> ep(Sp);
  double logdet_p = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double ev = ep.eigenvalues()(i);
    if (ev <= 0.0) {
      out.value = INFINITY;
      return out;
    }
    logdet_p += std::log(ev);
  }
  out.value = std::max(0.0, 0.5 * (trace_term - static_cast<double>(d) + maha + logdet_q - logdet_p));
  return out;
}

double gaussian_kl(const GaussianState& p, const GaussianState& q) {
  return gaussian_kl_detail(p, q).value;
}

double gaussian_w2(const GaussianState& p, const GaussianState& q) {
  require(p.mean.size() == q.mean.size(), "Gaussian dimensions disagree");
  const Mat root_q = sym_sqrt(q.cov);
  const Mat cross = sym_sqrt(symmetrize(root_q * p.cov * root_q));
  const double bures = p.cov.trace() + q.cov.trace() - 2.0 * cross.trace();
  return std::sqrt((p.mean - q.mean).squaredNorm() + std::max(0.0, bures));
}

std::vector<CurvePoint> entropy_cost_curve(const BlockModel& model, const Vec& x, const Vec& y,
                                           const std::vector<double>& t_grid) {
  require(x.size() == model.dim() && y.size() == model.dim(), "state dimension mismatch");
  const LinearForm lf = linear_form(model);
  std::vector<CurvePoint> curve;
  curve.reserve(t_grid.size());
  for (double t : t_grid) {
    CurvePoint pt;
    pt.t = t;
    const GaussianState px = propagate_linear(lf.F, lf.G, lf.u, GaussianState::point(x), t);
    const GaussianState py = propagate_linear(lf.F, lf.G, lf.u, GaussianState::point(y), t);
    try {
      pt.kl = gaussian_kl(px, py);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularReference) throw;
      pt.valid = false;
      pt.kl = INFINITY;
    }
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace kel
