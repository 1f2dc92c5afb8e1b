#include "kel/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/SVD>

#include "kel/error.hpp"
#include "kel/parallel.hpp"
#include "kel/rng.hpp"

namespace kel {

Vec BlockModel::first_block_drift(const Vec& x, const MeasureSummary* mu) const {
  const auto x1 = x.head(d1);
  const auto x2 = x.tail(d2);
  Vec out = A * x1 + B * x2;
  if (b) out += b(x, mu);
  return out;
}

Vec BlockModel::second_block_drift(double t, const Vec& x, const MeasureSummary* mu) const {
  Vec out = Z ? Z(t, x, mu) : Vec::Zero(d2);
  if (mean_field && mean_field->theta != 0.0) {
    const Vec x1 = x.head(d1);
    Vec grad_v = Vec::Zero(d1);
    if (mu == nullptr) {
      // Point-mass law at x itself.
      grad_v = mean_field->grad_W(x1, x);
    } else if (mean_field->grad_W_affine_in_z || mu->particles == nullptr) {
      grad_v = mean_field->grad_W(x1, mu->mean);
    } else {
      const RowMat& p = *mu->particles;
      for (Eigen::Index j = 0; j < p.rows(); ++j) {
        grad_v += mean_field->grad_W(x1, p.row(j).transpose());
      }
      grad_v /= static_cast<double>(p.rows());
    }
    out -= B.transpose() * grad_v;
  }
  return out;
}

Mat BlockModel::diffusion(double t, const MeasureSummary* mu) const {
  if (mean_field && mean_field->sigma_of_measure && mu != nullptr) {
    return mean_field->sigma_of_measure(*mu);
  }
  if (sigma) return sigma(t, mu);
  return Mat::Zero(d2, d2);
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double rel_step) {
  const Vec f0 = f(x);
  Mat jac(f0.size(), x.size());
  Vec xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = rel_step * std::max(1.0, std::abs(x(j)));
    xp(j) = x(j) + step;
    const Vec fp = f(xp);
    xp(j) = x(j) - step;
    const Vec fm = f(xp);
    xp(j) = x(j);
    jac.col(j) = (fp - fm) / (2.0 * step);
  }
  return jac;
}

Mat BlockModel::jacobian_b(const Vec& x, double fd_step) const {
  if (!b) return Mat::Zero(d1, dim());
  if (jac_b) return jac_b(x);
  return fd_jacobian([this](const Vec& y) { return b(y, nullptr); }, x, fd_step);
}

Mat BlockModel::jacobian_Z(double t, const Vec& x, double fd_step) const {
  if (!Z) return Mat::Zero(d2, dim());
  if (jac_Z) return jac_Z(t, x);
  return fd_jacobian([this, t](const Vec& y) { return Z(t, y, nullptr); }, x, fd_step);
}

void BlockModel::drift_all(double t, const RowMat& states, const MeasureSummary* mu,
                           RowMat& out) const {
  out.resize(states.rows(), dim());
  if (batch_drift) {
    batch_drift(t, states, mu, out);
    return;
  }
  parallel_for(states.rows(), [&](std::int64_t i) {
    const Vec x = states.row(i).transpose();
    out.row(i).head(d1) = first_block_drift(x, mu).transpose();
    out.row(i).tail(d2) = second_block_drift(t, x, mu).transpose();
  });
}

void BlockModel::validate() const {
  require(d1 > 0 && d2 > 0, "block dimensions must be positive");
  require(A.rows() == d1 && A.cols() == d1, "A must be d1 x d1");
  require(B.rows() == d1 && B.cols() == d2, "B must be d1 x d2");
  MeasureSummary origin{Vec::Zero(dim()), Mat::Zero(dim(), dim()), nullptr};
  const Mat s = diffusion(0.0, &origin);
  require(s.rows() == d2 && s.cols() == d2, "sigma must be d2 x d2");
  if (nondegenerate_noise) {
    Eigen::JacobiSVD<Mat> svd(s);
    const Vec& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    require(smin > 0.0 && sv(0) / smin <= sigma_condition_cap,
            "sigma is not invertible within the condition cap");
  }
}

LinearForm linear_form(const BlockModel& model) {
  require(model.linear, "model '" + model.name + "' is not flagged linear");
  const int n = model.dim();
  const Vec origin = Vec::Zero(n);
  LinearForm lf;
  lf.F = Mat::Zero(n, n);
  lf.F.topLeftCorner(model.d1, model.d1) = model.A;
  lf.F.topRightCorner(model.d1, model.d2) = model.B;
  lf.F.topRows(model.d1) += model.jacobian_b(origin);
  lf.F.bottomRows(model.d2) = model.jacobian_Z(0.0, origin);
  lf.u = Vec::Zero(n);
  if (model.b) lf.u.head(model.d1) = model.b(origin, nullptr);
  if (model.Z) lf.u.tail(model.d2) = model.Z(0.0, origin, nullptr);
  lf.G = Mat::Zero(n, model.d2);
  lf.G.bottomRows(model.d2) = model.diffusion(0.0, nullptr);
  return lf;
}

BlockModel kinetic_ou(int d) {
  require(d > 0, "kinetic-ou dimension must be positive");
  BlockModel m;
  m.name = "kinetic-ou";
  m.d1 = d;
  m.d2 = d;
  m.A = Mat::Zero(d, d);
  m.B = Mat::Identity(d, d);
  m.Z = [d](double, const Vec& x, const MeasureSummary*) -> Vec {
    return -x.head(d) - x.tail(d);
  };
  m.jac_Z = [d](double, const Vec&) -> Mat {
    Mat j(d, 2 * d);
    j << -Mat::Identity(d, d), -Mat::Identity(d, d);
    return j;
  };
  m.sigma = [d](double, const MeasureSummary*) -> Mat {
    return std::sqrt(2.0) * Mat::Identity(d, d);
  };
  m.batch_drift = [d](double, const RowMat& x, const MeasureSummary*, RowMat& out) {
    out.leftCols(d) = x.rightCols(d);
    out.rightCols(d) = -x.leftCols(d) - x.rightCols(d);
  };
  m.linear = true;
  return m;
}

BlockModel chain_model(double damping) {
  BlockModel m;
  m.name = "chain";
  m.d1 = 2;
  m.d2 = 1;
  m.A = Mat::Zero(2, 2);
  m.A(0, 1) = 1.0;
  m.B = Mat::Zero(2, 1);
  m.B(1, 0) = 1.0;
  m.Z = [damping](double, const Vec& x, const MeasureSummary*) -> Vec {
    return Vec::Constant(1, -damping * x(2));
  };
  m.jac_Z = [damping](double, const Vec&) -> Mat {
    Mat j = Mat::Zero(1, 3);
    j(0, 2) = -damping;
    return j;
  };
  m.sigma = [](double, const MeasureSummary*) -> Mat {
    return Mat::Constant(1, 1, std::sqrt(2.0));
  };
  m.batch_drift = [damping](double, const RowMat& x, const MeasureSummary*, RowMat& out) {
    out.col(0) = x.col(1);
    out.col(1) = x.col(2);
    out.col(2) = -damping * x.col(2);
  };
  m.linear = true;
  return m;
}

BlockModel granular(const GranularParams& params) {
  const int d = params.d;
  require(d > 0, "granular dimension must be positive");
  require(params.beta > 0.0, "granular beta must be positive");
  require(params.theta >= 0.0 && params.alpha >= 0.0, "granular theta, alpha must be >= 0");
  require(std::sqrt(params.alpha / d) < std::sqrt(2.0),
          "granular alpha too large: sigma would lose invertibility");
  const Mat B = params.B.value_or(Mat::Identity(d, d));
  require(B.rows() == d && B.cols() == d, "granular B must be d x d");
  require(numerical_rank(B) == d, "granular B must be invertible");

  BlockModel m;
  m.name = "granular";
  m.d1 = d;
  m.d2 = d;
  m.A = Mat::Zero(d, d);
  m.B = B;
  const double beta = params.beta;
  // beta B^T (B B^T)^{-1}
  const Mat pull = beta * B.transpose() * (B * B.transpose()).inverse();
  m.Z = [d, pull](double, const Vec& x, const MeasureSummary*) -> Vec {
    return -(pull * x.head(d) + x.tail(d));
  };
  m.jac_Z = [d, pull](double, const Vec&) -> Mat {
    Mat j(d, 2 * d);
    j << -pull, -Mat::Identity(d, d);
    return j;
  };
  const double eps = params.b_amplitude;
  if (eps != 0.0) {
    m.b = [d, eps](const Vec& x, const MeasureSummary*) -> Vec {
      return eps * x.tail(d).array().sin().matrix();
    };
    m.jac_b = [d, eps](const Vec& x) -> Mat {
      Mat j = Mat::Zero(d, 2 * d);
      j.rightCols(d) = (eps * x.tail(d).array().cos()).matrix().asDiagonal();
      return j;
    };
  }
  m.sigma = [d](double, const MeasureSummary*) -> Mat {
    return std::sqrt(2.0) * Mat::Identity(d, d);
  };

  MeanFieldSpec mf;
  const double theta = params.theta;
  mf.grad_W = [d, theta](const Vec& v, const Vec& z) -> Vec { return theta * (v - z.head(d)); };
  mf.grad_W_affine_in_z = true;
  mf.beta = beta;
  mf.theta = theta;
  mf.alpha = params.alpha;
  if (params.alpha > 0.0) {
    const double scale = std::sqrt(params.alpha / d);
    mf.sigma_of_measure = [d, scale](const MeasureSummary& mu) -> Mat {
      return (std::sqrt(2.0) + scale * std::sin(mu.mean(0))) * Mat::Identity(d, d);
    };
  }
  m.mean_field = mf;
  const Mat Bt = B.transpose();
  m.batch_drift = [d, B, Bt, pull, eps, theta](double, const RowMat& x,
                                               const MeasureSummary* mu, RowMat& out) {
    out.leftCols(d) = x.rightCols(d) * Bt;
    if (eps != 0.0) out.leftCols(d) += eps * x.rightCols(d).array().sin().matrix();
    out.rightCols(d) = -(x.leftCols(d) * pull.transpose() + x.rightCols(d));
    if (theta != 0.0) {
      // row form of -B^T grad_W(x1, mean) = -theta (x1 - m1) B
      RowMat centered = x.leftCols(d);
      if (mu != nullptr) {
        centered.rowwise() -= mu->mean.head(d).transpose();
      } else {
        centered.setZero();
      }
      out.rightCols(d) -= theta * centered * B;
    }
  };
  m.linear = (theta == 0.0 && params.alpha == 0.0 && eps == 0.0);
  return m;
}

BlockModel linear_model(const Mat& A, const Mat& B, const Mat& Zx, const Vec& z0,
                        const Mat& sigma, std::string name) {
  BlockModel m;
  m.name = std::move(name);
  m.d1 = static_cast<int>(A.rows());
  m.d2 = static_cast<int>(B.cols());
  m.A = A;
  m.B = B;
  require(Zx.rows() == m.d2 && Zx.cols() == m.dim(), "Z matrix must be d2 x (d1+d2)");
  require(z0.size() == m.d2, "Z offset must have d2 entries");
  m.Z = [Zx, z0](double, const Vec& x, const MeasureSummary*) -> Vec { return Zx * x + z0; };
  m.jac_Z = [Zx](double, const Vec&) -> Mat { return Zx; };
  m.sigma = [sigma](double, const MeasureSummary*) -> Mat { return sigma; };
  const int d1 = m.d1;
  const int d2 = m.d2;
  const Mat At = A.transpose();
  const Mat Bt = B.transpose();
  const Mat Zt = Zx.transpose();
  m.batch_drift = [d1, d2, At, Bt, Zt, z0](double, const RowMat& x, const MeasureSummary*,
                                           RowMat& out) {
    out.leftCols(d1) = x.leftCols(d1) * At + x.rightCols(d2) * Bt;
    out.rightCols(d2) = x * Zt;
    out.rightCols(d2).rowwise() += z0.transpose();
  };
  m.linear = true;
  m.validate();
  return m;
}

BlockModel with_drift_shift(const BlockModel& model, const Vec& shift) {
  require(shift.size() == model.d2, "drift shift must have d2 entries");
  BlockModel m = model;
  m.name = model.name + "+shift";
  auto base = model.Z;
  m.Z = [base, shift](double t, const Vec& x, const MeasureSummary* mu) -> Vec {
    return (base ? base(t, x, mu) : Vec::Zero(shift.size())) + shift;
  };
  if (model.batch_drift) {
    auto base_batch = model.batch_drift;
    const int d2 = model.d2;
    m.batch_drift = [base_batch, shift, d2](double t, const RowMat& x, const MeasureSummary* mu,
                                            RowMat& out) {
      base_batch(t, x, mu, out);
      out.rightCols(d2).rowwise() += shift.transpose();
    };
  }
  return m;
}

int kalman_index(const Mat& A, const Mat& B, double rel_tol) {
  require(A.rows() == A.cols(), "A must be square");
  require(A.rows() == B.rows(), "A and B row counts differ");
  const Eigen::Index d1 = A.rows();
  Mat stacked(d1, 0);
  Mat block = B;
  for (Eigen::Index k = 0; k < d1; ++k) {
    Mat next(d1, stacked.cols() + B.cols());
    next << stacked, block;
    stacked = std::move(next);
    if (numerical_rank(stacked, rel_tol) == d1) return static_cast<int>(k);
    block = A * block;
  }
  fail(ErrorCode::NotControllable, "rank[B, AB, ..., A^(d1-1) B] < d1");
}

double kappa(double beta, double theta1, double theta2) {
  require(beta > 0.0, "beta must be positive");
  if (theta1 + theta2 >= beta) {
    fail(ErrorCode::RateNotPositive, "theta1 + theta2 >= beta");
  }
  const double b2 = beta * beta;
  return 2.0 * (beta - theta1 - theta2) / (2.0 + 2.0 * beta + b2 + std::sqrt(b2 * b2 + 4.0));
}

TwistedConstants twisted_constants(double beta) {
  require(beta > 0.0, "beta must be positive");
  const double q = 1.0 + beta + beta * beta;
  return {std::sqrt(q / (1.0 + beta)), 1.0 / std::sqrt((1.0 + beta) * q)};
}

GranularThetas granular_thetas(double theta, double alpha, double beta) {
  require(beta > 0.0, "beta must be positive");
  const double root = std::sqrt(2.0 + 2.0 * beta + beta * beta);
  return {theta * (0.5 + root), 0.5 * theta * root + alpha * (beta + 1.0) / (2.0 * beta)};
}

Mat twisted_quadratic_form(double beta, const Mat& B) {
  require(B.rows() == B.cols(), "twisted metric needs square B");
  const auto [a, r] = twisted_constants(beta);
  const Eigen::Index d = B.rows();
  Mat m(2 * d, 2 * d);
  m.topLeftCorner(d, d) = a * a * Mat::Identity(d, d);
  m.topRightCorner(d, d) = r * a * B;
  m.bottomLeftCorner(d, d) = r * a * B.transpose();
  m.bottomRightCorner(d, d) = B.transpose() * B;
  return m;
}

double twisted_metric(const Vec& x, const Vec& y, double beta, const Mat& B) {
  require(x.size() == y.size(), "states differ in dimension");
  require(B.rows() == B.cols() && x.size() == 2 * B.rows(), "state must be (d, d) with B d x d");
  const auto [a, r] = twisted_constants(beta);
  const Eigen::Index d = B.rows();
  const Vec d1 = x.head(d) - y.head(d);
  const Vec bd2 = B * (x.tail(d) - y.tail(d));
  const double q = a * a * d1.squaredNorm() + bd2.squaredNorm() + 2.0 * r * a * d1.dot(bd2);
  if (q < -1e-12) fail(ErrorCode::NonPositiveForm, "negative radicand in twisted metric");
  return std::sqrt(std::max(q, 0.0));
}

namespace {

Vec uniform_box(CounterRng& rng, int n, double box) {
  Vec x(n);
  for (int i = 0; i < n; ++i) x(i) = (2.0 * rng.uniform() - 1.0) * box;
  return x;
}

Vec unit_vector(CounterRng& rng, int n) {
  Vec v(n);
  do {
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
  } while (v.norm() == 0.0);
  return v.normalized();
}

struct ProbeOutcome {
  double margin = std::numeric_limits<double>::infinity();
  double ratio = -std::numeric_limits<double>::infinity();
  Vec x;
  Vec v;
};

}  // namespace

DissipativityResult check_dissipativity(const BlockModel& model, double delta,
                                        const ProbePlan& plan) {
  require(delta > 0.0 && delta < 1.0, "dissipativity delta must lie in (0, 1)");
  require(plan.n_states > 0 && plan.n_directions > 0, "probe plan needs states and directions");
  const int n = model.dim();
  std::vector<ProbeOutcome> outcomes(plan.n_states);
  parallel_for(plan.n_states, [&](std::int64_t s) {
    CounterRng rng(plan.seed, StreamTag::Probe, static_cast<std::uint64_t>(s));
    const Vec x = uniform_box(rng, n, plan.box);
    const Mat j2 = model.jacobian_b(x, plan.fd_step).rightCols(model.d2);
    ProbeOutcome& out = outcomes[s];
    for (int k = 0; k < plan.n_directions; ++k) {
      const Vec v = unit_vector(rng, model.d1);
      const Vec w = model.B.transpose() * v;
      const double inner = v.dot(j2 * w);
      const double w2 = w.squaredNorm();
      const double margin = inner + delta * w2;
      if (margin < out.margin) {
        out.margin = margin;
        out.x = x;
        out.v = v;
      }
      if (w2 > 0.0) out.ratio = std::max(out.ratio, -inner / w2);
    }
  });
  DissipativityResult result;
  result.worst_margin = std::numeric_limits<double>::infinity();
  double worst_ratio = 0.0;
  for (const ProbeOutcome& o : outcomes) {
    if (o.margin < result.worst_margin) {
      result.worst_margin = o.margin;
      result.witness_x = o.x;
      result.witness_v = o.v;
    }
    worst_ratio = std::max(worst_ratio, o.ratio);
  }
  result.delta_min = worst_ratio;
  result.pass = result.worst_margin >= 0.0;
  return result;
}

double audit_kernel_lipschitz(const MeanFieldSpec& spec, int d1, int dim, const ProbePlan& plan) {
  CounterRng rng(plan.seed, StreamTag::Probe, 0xA0D17ull);
  double worst = 0.0;
  const int pairs = std::max(1, plan.n_states / 10);
  for (int i = 0; i < pairs; ++i) {
    const Vec v = uniform_box(rng, d1, plan.box);
    const Vec vb = uniform_box(rng, d1, plan.box);
    const Vec z = uniform_box(rng, dim, plan.box);
    const Vec zb = uniform_box(rng, dim, plan.box);
    const double denom = (v - vb).norm() + (z - zb).norm();
    if (denom == 0.0) continue;
    worst = std::max(worst, (spec.grad_W(v, z) - spec.grad_W(vb, zb)).norm() / denom);
  }
  return worst;
}

ConditionReport condition_report(const BlockModel& model, double delta, const ProbePlan& plan) {
  model.validate();
  ConditionReport rep;
  try {
    rep.kalman_index = kalman_index(model.A, model.B);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotControllable) throw;
  }
  const DissipativityResult dis = check_dissipativity(model, delta, plan);
  rep.dissipativity_worst_margin = dis.worst_margin;
  if (dis.delta_min < 1.0) rep.dissipativity_delta = dis.delta_min;
  if (model.mean_field) {
    const MeanFieldSpec& mf = *model.mean_field;
    const auto [t1, t2] = granular_thetas(mf.theta, mf.alpha, mf.beta);
    rep.theta1 = t1;
    rep.theta2 = t2;
    if (t1 + t2 < mf.beta) rep.kappa = kappa(mf.beta, t1, t2);
    const auto [a, r] = twisted_constants(mf.beta);
    rep.twisted_a = a;
    rep.twisted_r = r;
    rep.theta_audit = audit_kernel_lipschitz(mf, model.d1, model.dim(), plan);
  }
  return rep;
}

}  // namespace kel
