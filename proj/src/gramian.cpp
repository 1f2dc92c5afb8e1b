#include "kel/gramian.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "kel/error.hpp"
#include "kel/parallel.hpp"
#include "kel/quadrature.hpp"
#include "kel/rng.hpp"

namespace kel {

namespace {

Vec noise_free_drift(const BlockModel& model, double tau, const Vec& x) {
  Vec out(model.dim());
  out.head(model.d1) = model.first_block_drift(x, nullptr);
  out.tail(model.d2) = model.second_block_drift(tau, x, nullptr);
  return out;
}

Mat flow_generator(const BlockModel& model, const Vec& x) {
  return model.A + model.jacobian_b(x).leftCols(model.d1);
}

int rk4_steps(double span) { return std::max(64, static_cast<int>(std::ceil(span * 2000.0))); }

// Noise-free state at time `until`, from x0 at time 0.
Vec advance_state(const BlockModel& model, Vec x, double from, double until) {
  if (until <= from) return x;
  const int n = rk4_steps(until - from);
  const double dt = (until - from) / n;
  for (int i = 0; i < n; ++i) {
    const double tau = from + i * dt;
    const Vec k1 = noise_free_drift(model, tau, x);
    const Vec k2 = noise_free_drift(model, tau + 0.5 * dt, x + 0.5 * dt * k1);
    const Vec k3 = noise_free_drift(model, tau + 0.5 * dt, x + 0.5 * dt * k2);
    const Vec k4 = noise_free_drift(model, tau + dt, x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

}  // namespace

Mat flow_K(const BlockModel& model, double t, double s, const std::optional<FrozenTrajectory>& along) {
  require(0.0 <= s && s <= t, "flow_K needs 0 <= s <= t");
  const int d1 = model.d1;
  if (t == s) return Mat::Identity(d1, d1);
  if (!model.b) {
    const Mat a = model.A * (t - s);
    return a.exp();
  }
  const Vec x0 = along ? along->x0 : Vec::Zero(model.dim());
  require(x0.size() == model.dim(), "trajectory start has the wrong dimension");
  // (X, K) jointly from s to t.
  Vec x = advance_state(model, x0, 0.0, s);
  Mat K = Mat::Identity(d1, d1);
  const int n = rk4_steps(t - s);
  const double dt = (t - s) / n;
  for (int i = 0; i < n; ++i) {
    const double tau = s + i * dt;
    const Vec kx1 = noise_free_drift(model, tau, x);
    const Mat kk1 = flow_generator(model, x) * K;
    const Vec x2 = x + 0.5 * dt * kx1;
    const Vec kx2 = noise_free_drift(model, tau + 0.5 * dt, x2);
    const Mat kk2 = flow_generator(model, x2) * (K + 0.5 * dt * kk1);
    const Vec x3 = x + 0.5 * dt * kx2;
    const Vec kx3 = noise_free_drift(model, tau + 0.5 * dt, x3);
    const Mat kk3 = flow_generator(model, x3) * (K + 0.5 * dt * kk2);
    const Vec x4 = x + dt * kx3;
    const Vec kx4 = noise_free_drift(model, tau + dt, x4);
    const Mat kk4 = flow_generator(model, x4) * (K + dt * kk3);
    x += (dt / 6.0) * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4);
    K += (dt / 6.0) * (kk1 + 2.0 * kk2 + 2.0 * kk3 + kk4);
  }
  return K;
}

double flow_growth_bound(const BlockModel& model, const ProbePlan& plan) {
  Eigen::JacobiSVD<Mat> svd_a(model.A);
  const double norm_a = model.A.size() ? svd_a.singularValues()(0) : 0.0;
  if (!model.b) return norm_a;
  std::vector<double> worst(plan.n_states, 0.0);
  parallel_for(plan.n_states, [&](std::int64_t i) {
    CounterRng rng(plan.seed, StreamTag::Probe, static_cast<std::uint64_t>(i));
    Vec x(model.dim());
    for (Eigen::Index c = 0; c < x.size(); ++c) x(c) = plan.box * (2.0 * rng.uniform() - 1.0);
    const Mat j = model.jacobian_b(x, plan.fd_step).leftCols(model.d1);
    Eigen::JacobiSVD<Mat> svd(j);
    worst[i] = svd.singularValues()(0);
  });
  return norm_a + *std::max_element(worst.begin(), worst.end());
}

GramianResult gramian_Q(const BlockModel& model, double t, double s, int nodes,
                        const std::optional<FrozenTrajectory>& along) {
  require(0.0 < s && s <= t, "gramian needs 0 < s <= t");
  require(nodes >= 16, "gramian needs at least 16 quadrature nodes");
  const QuadratureRule rule = gauss_legendre(nodes, 0.0, s);
  const int d1 = model.d1;
  std::vector<Mat> terms(nodes);
  parallel_for(nodes, [&](std::int64_t j) {
    const double r = rule.nodes[j];
    const Mat KB = flow_K(model, t, r, along) * model.B;
    terms[j] = (rule.weights[j] * r * (t - r) / (t * t)) * (KB * KB.transpose());
  });
  Mat Q = Mat::Zero(d1, d1);
  for (const Mat& term : terms) Q += term;
  GramianResult out;
  out.Q = symmetrize(Q);
  out.t = t;
  out.s = s;
  out.lambda_min = lambda_min(out.Q);
  out.nodes = nodes;
  return out;
}

ScalingResult verify_gramian_scaling(const BlockModel& model, double t,
                                     const std::vector<double>& s_grid, int nodes) {
  require(s_grid.size() >= 6, "scaling check needs at least 6 grid points");
  const auto [lo, hi] = std::minmax_element(s_grid.begin(), s_grid.end());
  require(*lo > 0.0 && *hi <= t, "grid must lie in (0, t]");
  require(std::log10(*hi / *lo) >= 1.5 - 1e-12, "grid must span at least 1.5 decades");

  ScalingResult out;
  std::vector<double> log_s;
  std::vector<double> log_l;
  for (double s : s_grid) {
    const GramianResult g = gramian_Q(model, t, s, nodes);
    if (!(g.lambda_min > 0.0)) {
      fail(ErrorCode::NotPositiveDefinite,
           "lambda_min(Q) = " + std::to_string(g.lambda_min) + " at s=" + std::to_string(s));
    }
    out.s.push_back(s);
    out.lambda_min.push_back(g.lambda_min);
    log_s.push_back(std::log(s));
    log_l.push_back(std::log(g.lambda_min));
  }
  const FitResult fit = line_fit(log_s, log_l);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.r2 = fit.r2;
  const int k = kalman_index(model.A, model.B);
  out.expected_exponent = 2 * (k + 1);
  out.c0 = INFINITY;
  for (std::size_t i = 0; i < out.s.size(); ++i) {
    out.c0 = std::min(out.c0, out.lambda_min[i] * t / std::pow(out.s[i], out.expected_exponent));
  }
  for (std::size_t i = 0; i < out.s.size(); ++i) {
    out.margins.push_back(out.lambda_min[i] - out.c0 * std::pow(out.s[i], out.expected_exponent) / t);
  }
  return out;
}

}  // namespace kel
