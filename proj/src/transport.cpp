#include "kel/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kel/assignment.hpp"
#include "kel/error.hpp"
#include "kel/model.hpp"
#include "kel/parallel.hpp"
#include "kel/rng.hpp"

namespace kel {

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::ExactAssignment: return "exact_assignment";
    case Estimator::Sinkhorn: return "sinkhorn";
    case Estimator::GaussianClosedForm: return "gaussian_closed_form";
    case Estimator::KnnKl: return "knn_kl";
    case Estimator::DvLowerBound: return "dv_lower_bound";
  }
  return "unknown";
}

GroundCost GroundCost::twisted(double beta, const Mat& B) {
  return GroundCost{twisted_quadratic_form(beta, B)};
}

double GroundCost::operator()(const Eigen::Ref<const Vec>& x,
                              const Eigen::Ref<const Vec>& y) const {
  const Vec diff = x - y;
  if (!form) return diff.squaredNorm();
  return diff.dot(*form * diff);
}

RowMat cost_matrix(const DiscreteCloud& x, const DiscreteCloud& y, const GroundCost& cost) {
  require(x.dim() == y.dim(), "clouds differ in dimension");
  const Eigen::Index n = x.size();
  const Eigen::Index m = y.size();
  RowMat c(n, m);
  if (!cost.form) {
    parallel_for(n, [&](std::int64_t i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        c(i, j) = (x.points.row(i) - y.points.row(j)).squaredNorm();
      }
    });
    return c;
  }
  const Mat& M = *cost.form;
  parallel_for(n, [&](std::int64_t i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Vec diff = (x.points.row(i) - y.points.row(j)).transpose();
      c(i, j) = std::max(0.0, diff.dot(M * diff));
    }
  });
  return c;
}

DivergenceEstimate w2_exact(const DiscreteCloud& x, const DiscreteCloud& y,
                            const GroundCost& cost, Eigen::Index cap) {
  require(x.size() == y.size(), "exact W2 needs clouds of equal size");
  require(x.size() > 0, "empty cloud");
  if (x.size() > cap) {
    fail(ErrorCode::TooLarge, "N=" + std::to_string(x.size()) + " exceeds the exact-assignment cap " +
                                  std::to_string(cap) + "; use the Sinkhorn estimator");
  }
  const RowMat c = cost_matrix(x, y, cost);
  const Assignment a = solve_assignment(c);
  DivergenceEstimate est;
  est.estimator = Estimator::ExactAssignment;
  est.value = std::sqrt(std::max(0.0, a.total_cost / static_cast<double>(x.size())));
  est.matching = a.row_to_col;
  est.metadata["n"] = static_cast<double>(x.size());
  return est;
}


EntropicPlan sinkhorn_plan(const RowMat& cost, double epsilon, const SinkhornOptions& options,
                           const Vec* f_init, const Vec* g_init) {
  require(epsilon > 0.0, "epsilon must be positive");
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));
  const double inv_eps = 1.0 / epsilon;
  EntropicPlan plan;
  plan.f = f_init ? *f_init : Vec::Zero(n);
  plan.g = g_init ? *g_init : Vec::Zero(m);
  Eigen::ArrayXd row(m);
  Eigen::ArrayXd col_max(m);
  Eigen::ArrayXd col_sum(m);

  // g_j = -eps * LSE_i(log a + (f_i - C_ij)/eps), two row-wise passes.
  auto update_g = [&]() {
    col_max.setConstant(-std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < n; ++i) {
      col_max = col_max.max(plan.f(i) - cost.row(i).transpose().array());
    }
    col_sum.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      col_sum += ((plan.f(i) - cost.row(i).transpose().array() - col_max) * inv_eps).exp();
    }
    plan.g = (-(col_max + epsilon * (log_a + col_sum.log()))).matrix();
  };
  auto update_f = [&]() {
    for (Eigen::Index i = 0; i < n; ++i) {
      row = plan.g.array() - cost.row(i).transpose().array();
      const double hi = row.maxCoeff();
      plan.f(i) = -(hi + epsilon * (log_b + std::log(((row - hi) * inv_eps).exp().sum())));
    }
  };
  // After an f update the row marginals are exact; measure the columns.
  auto column_violation = [&]() {
    col_sum.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      col_sum += ((plan.f(i) + plan.g.array() - cost.row(i).transpose().array()) * inv_eps + log_a + log_b).exp();
    }
    return (col_sum - std::exp(log_b)).abs().sum();
  };

  for (plan.iterations = 0; plan.iterations < options.max_iters;) {
    update_g();
    update_f();
    ++plan.iterations;
    if (plan.iterations % 10 == 0 || plan.iterations == options.max_iters) {
      plan.marginal_error = column_violation();
      if (plan.marginal_error < options.tol) {
        plan.converged = true;
        break;
      }
    }
  }
  plan.dual_value = std::exp(log_a) * plan.f.sum() + std::exp(log_b) * plan.g.sum();
  double primal = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::ArrayXd c = cost.row(i).transpose().array();
    primal += (((plan.f(i) + plan.g.array() - c) * inv_eps + log_a + log_b).exp() * c).sum();
  }
  plan.primal_cost = primal;
  return plan;
}

namespace {

double median_of(const RowMat& c) {
  std::vector<double> all(c.data(), c.data() + c.size());
  const auto mid = all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2);
  std::nth_element(all.begin(), mid, all.end());
  return *mid;
}

// Runs the geometric schedule and returns the final-stage plan.
EntropicPlan annealed(const RowMat& cost, double start, double epsilon,
                      const SinkhornOptions& options, int* total_iters) {
  const int stages = std::max(1, options.stages);
  const double eps0 = std::max(start, epsilon);
  EntropicPlan plan;
  for (int s = 0; s < stages; ++s) {
    const double frac = stages == 1 ? 1.0 : static_cast<double>(s) / (stages - 1);
    const double eps = eps0 * std::pow(epsilon / eps0, frac);
    if (s == 0) {
      plan = sinkhorn_plan(cost, eps, options);
    } else {
      const Vec f = plan.f;
      const Vec g = plan.g;
      plan = sinkhorn_plan(cost, eps, options, &f, &g);
    }
    *total_iters += plan.iterations;
  }
  return plan;
}

}  // namespace

double median_cost(const DiscreteCloud& x, const DiscreteCloud& y, const GroundCost& cost) {
  return median_of(cost_matrix(x, y, cost));
}

DivergenceEstimate w2_sinkhorn(const DiscreteCloud& x, const DiscreteCloud& y, double epsilon,
                               const SinkhornOptions& options, const GroundCost& cost) {
  require(epsilon > 0.0, "epsilon must be positive");
  require(x.size() > 0 && y.size() > 0, "empty cloud");
  const RowMat cxy = cost_matrix(x, y, cost);
  const double start = median_of(cxy);
  int iters = 0;
  const EntropicPlan pxy = annealed(cxy, start, epsilon, options, &iters);
  double w2_sq = pxy.dual_value;
  bool converged = pxy.converged;
  if (options.debias) {
    const EntropicPlan pxx = annealed(cost_matrix(x, x, cost), start, epsilon, options, &iters);
    const EntropicPlan pyy = annealed(cost_matrix(y, y, cost), start, epsilon, options, &iters);
    w2_sq -= 0.5 * (pxx.dual_value + pyy.dual_value);
    converged = converged && pxx.converged && pyy.converged;
  }
  DivergenceEstimate est;
  est.estimator = Estimator::Sinkhorn;
  est.value = std::sqrt(std::max(0.0, w2_sq));
  est.converged = converged;
  est.metadata["epsilon"] = epsilon;
  est.metadata["iterations"] = iters;
  est.metadata["marginal_error"] = pxy.marginal_error;
  est.metadata["raw_entropic_cost"] = pxy.dual_value;
  return est;
}

double w2_bootstrap_stderr(const DiscreteCloud& x, const DiscreteCloud& y, int resamples,
                           std::uint64_t seed, const GroundCost& cost) {
  require(resamples >= 2, "bootstrap needs at least two resamples");
  std::vector<double> values(resamples);
  parallel_for(resamples, [&](std::int64_t r) {
    CounterRng rng(seed, StreamTag::Bootstrap, static_cast<std::uint64_t>(r));
    DiscreteCloud xs{RowMat(x.size(), x.dim())};
    DiscreteCloud ys{RowMat(y.size(), y.dim())};
    for (Eigen::Index i = 0; i < x.size(); ++i) xs.points.row(i) = x.points.row(rng.below(x.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) ys.points.row(i) = y.points.row(rng.below(y.size()));
    values[r] = w2_exact(xs, ys, cost, std::max(x.size(), kExactCap)).value;
  });
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= resamples;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / (resamples - 1));
}

DivergenceEstimate w2_auto(const DiscreteCloud& x, const DiscreteCloud& y, int resamples,
                           std::uint64_t seed, const GroundCost& cost) {
  DivergenceEstimate est;
  if (x.size() == y.size() && x.size() <= kExactCap) {
    est = w2_exact(x, y, cost);
  } else {
    est = w2_sinkhorn(x, y, 0.01 * median_cost(x, y, cost), {}, cost);
  }
  if (resamples > 0 && x.size() == y.size() && x.size() <= kExactCap) {
    est.uncertainty = w2_bootstrap_stderr(x, y, resamples, seed, cost);
  }
  return est;
}

}  // namespace kel
