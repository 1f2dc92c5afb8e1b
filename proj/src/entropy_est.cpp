#include "kel/entropy_est.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kel/error.hpp"
#include "kel/parallel.hpp"
#include "kel/rng.hpp"

namespace kel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Squared distances of the kmax nearest rows of `ref` to each row of
// `query`, ascending; `skip_self` drops the matching index.
RowMat nearest_sq(const RowMat& query, const RowMat& ref, int kmax, bool skip_self) {
  const Eigen::Index n = query.rows();
  const Eigen::Index m = ref.rows();
  RowMat out(n, kmax);
  parallel_for(n, [&](std::int64_t i) {
    std::vector<double> best(kmax, std::numeric_limits<double>::infinity());
    for (Eigen::Index j = 0; j < m; ++j) {
      if (skip_self && j == i) continue;
      const double d2 = (query.row(i) - ref.row(j)).squaredNorm();
      if (d2 < best.back()) {
        auto pos = std::upper_bound(best.begin(), best.end(), d2);
        best.insert(pos, d2);
        best.pop_back();
      }
    }
    for (int k = 0; k < kmax; ++k) out(i, k) = best[k];
  });
  return out;
}

struct NeighbourTables {
  RowMat within;  // rho^2
  RowMat across;  // nu^2
  int jittered = 0;
};

NeighbourTables neighbour_tables(const RowMat& p, const RowMat& q, int kmax) {
  require(p.cols() == q.cols() && p.cols() >= 1, "sample dimensions disagree");
  require(kmax >= 1, "k must be positive");
  require(kmax < std::min(p.rows(), q.rows()), "k must be below both sample sizes");
  NeighbourTables t;
  RowMat pj = p;
  t.within = nearest_sq(pj, pj, kmax, true);
  t.across = nearest_sq(pj, q, kmax, false);
  std::vector<Eigen::Index> dup;
  for (Eigen::Index i = 0; i < pj.rows(); ++i) {
    if (t.within(i, 0) == 0.0 || t.across(i, 0) == 0.0) dup.push_back(i);
  }
  if (!dup.empty()) {
    for (Eigen::Index i : dup) {
      CounterRng rng(0, StreamTag::Jitter, static_cast<std::uint64_t>(i));
      for (Eigen::Index c = 0; c < pj.cols(); ++c) {
        pj(i, c) += 1e-12 * std::max(1.0, std::abs(pj(i, c))) * rng.normal();
      }
    }
    t.jittered = static_cast<int>(dup.size());
    t.within = nearest_sq(pj, pj, kmax, true);
    t.across = nearest_sq(pj, q, kmax, false);
  }
  for (Eigen::Index i = 0; i < pj.rows(); ++i) {
    for (int k = 0; k < kmax; ++k) {
      if (!(t.within(i, k) > 0.0) || !(t.across(i, k) > 0.0)) {
        fail(ErrorCode::DegenerateGeometry, "zero nearest-neighbour radius after jitter");
      }
    }
  }
  return t;
}

DivergenceEstimate estimate_from(const NeighbourTables& t, Eigen::Index n, Eigen::Index m,
                                 Eigen::Index d, int k) {
  Vec terms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    terms(i) = 0.5 * static_cast<double>(d) * std::log(t.across(i, k - 1) / t.within(i, k - 1));
  }
  const double mean = terms.mean();
  const double var = (terms.array() - mean).square().sum() / static_cast<double>(n - 1);
  DivergenceEstimate est;
  est.estimator = Estimator::KnnKl;
  const double raw = mean + std::log(static_cast<double>(m) / static_cast<double>(n - 1));
  est.value = std::max(0.0, raw);
  est.uncertainty = std::sqrt(var / static_cast<double>(n));
  est.metadata["k"] = k;
  est.metadata["raw"] = raw;
  est.metadata["jittered"] = t.jittered;
  return est;
}

}  // namespace

std::vector<DivergenceEstimate> knn_kl_multi(const RowMat& p_samples, const RowMat& q_samples,
                                             const std::vector<int>& ks) {
  require(!ks.empty(), "no k requested");
  const int kmax = *std::max_element(ks.begin(), ks.end());
  for (int k : ks) require(k >= 1, "k must be positive");
  const NeighbourTables t = neighbour_tables(p_samples, q_samples, kmax);
  std::vector<DivergenceEstimate> out;
  for (int k : ks) {
    out.push_back(estimate_from(t, p_samples.rows(), q_samples.rows(), p_samples.cols(), k));
  }
  return out;
}

DivergenceEstimate knn_kl(const RowMat& p_samples, const RowMat& q_samples, int k) {
  return knn_kl_multi(p_samples, q_samples, {k}).front();
}

Vec knn_kl_terms(const RowMat& p_samples, const RowMat& q_samples, int k) {
  const NeighbourTables t = neighbour_tables(p_samples, q_samples, k);
  Vec terms(p_samples.rows());
  for (Eigen::Index i = 0; i < terms.size(); ++i) {
    terms(i) = 0.5 * static_cast<double>(p_samples.cols()) *
               std::log(t.across(i, k - 1) / t.within(i, k - 1));
  }
  return terms;
}

namespace {

double log_mean_exp(const Vec& v) {
  const double hi = v.maxCoeff();
  if (!std::isfinite(hi)) return hi;
  return hi + std::log((v.array() - hi).exp().mean());
}

Vec log_f_all(const RowMat& x, const QuadraticTestFunction& f) {
  const Mat xq = x * f.Q;
  Vec out = (xq.array() * x.array()).rowwise().sum().matrix();
  out += x * f.l;
  out.array() += f.c;
  return out;
}

// Parameters: upper triangle of Q (row-major) then l.
struct Param {
  int d;
  DvFamily family;

  int size() const { return (family == DvFamily::Quadratic ? d * (d + 1) / 2 : 0) + d; }

  QuadraticTestFunction unpack(const Vec& th) const {
    QuadraticTestFunction f = QuadraticTestFunction::constant_one(d);
    int k = 0;
    if (family == DvFamily::Quadratic) {
      for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
          const double v = th(k++);
          if (i == j) {
            f.Q(i, i) = v;
          } else {
            f.Q(i, j) = f.Q(j, i) = 0.5 * v;
          }
        }
      }
    }
    f.l = th.tail(d);
    return f;
  }
};

class DvProblem {
 public:
  DvProblem(const RowMat& p, const RowMat& q, DvFamily family)
      : p_(p), q_(q), param_{static_cast<int>(p.cols()), family} {
    const Mat cov = sample_covariance(q);
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(cov));
    const Vec ev = es.eigenvalues().cwiseMax(1e-300);
    ref_precision_ = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                     es.eigenvectors().transpose();
  }

  const Param& param() const { return param_; }

  bool admissible(const QuadraticTestFunction& f) const {
    if (param_.family == DvFamily::Linear) return true;
    return lambda_min(symmetrize(ref_precision_ - 2.0 * f.Q)) > 0.0;
  }

  double value(const Vec& th) {
    ++evaluations_;
    const QuadraticTestFunction f = param_.unpack(th);
    if (!th.allFinite() || !admissible(f)) return kNegInf;
    const double v = log_f_all(p_, f).mean() - log_mean_exp(log_f_all(q_, f));
    return std::isfinite(v) ? v : kNegInf;
  }

  int evaluations() const { return evaluations_; }

 private:
  const RowMat& p_;
  const RowMat& q_;
  Param param_;
  Mat ref_precision_;
  int evaluations_ = 0;
};

// Golden-section maximisation of a unimodal function on [lo, hi].
template <class F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, int iters) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo;
  double b = hi;
  double x1 = b - g * (b - a);
  double x2 = a + g * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    }
  }
  return f1 >= f2 ? std::make_pair(x1, f1) : std::make_pair(x2, f2);
}

std::pair<Vec, double> coordinate_ascent(DvProblem& prob, Vec th, int budget) {
  double best = prob.value(th);
  if (!std::isfinite(best)) return {th, best};
  double width = 1.0;
  constexpr int kGoldenIters = 40;
  while (prob.evaluations() < budget) {
    const double before = best;
    double moved = 0.0;
    for (int c = 0; c < th.size() && prob.evaluations() < budget; ++c) {
      const double centre = th(c);
      auto along = [&](double v) {
        Vec trial = th;
        trial(c) = v;
        return prob.value(trial);
      };
      auto [arg, val] = golden_max(along, centre - width, centre + width, kGoldenIters);
      if (val > best) {
        moved = std::max(moved, std::abs(arg - centre));
        th(c) = arg;
        best = val;
      }
    }
    if (best - before < 1e-10 * std::max(1.0, std::abs(best))) break;
    // track the step scale; a move at the bracket edge widens it
    width = std::clamp(2.0 * moved, 1e-4, 4.0);
  }
  return {th, best};
}

}  // namespace

double dv_objective(const RowMat& p_samples, const RowMat& q_samples,
                    const QuadraticTestFunction& f) {
  require(p_samples.rows() > 0 && q_samples.rows() > 0, "sample sets must be nonempty");
  require(p_samples.cols() == q_samples.cols(), "sample dimensions disagree");
  return log_f_all(p_samples, f).mean() - log_mean_exp(log_f_all(q_samples, f));
}

DivergenceEstimate dv_lower_bound(const RowMat& p_samples, const RowMat& q_samples,
                                  const DvOptions& options, QuadraticTestFunction* best_out) {
  require(p_samples.rows() > 0 && q_samples.rows() > 0, "sample sets must be nonempty");
  require(p_samples.cols() == q_samples.cols(), "sample dimensions disagree");
  const Eigen::Index d = p_samples.cols();

  // Work in coordinates standardised by the pooled moments; the quadratic
  // family is closed under affine changes of variable.
  RowMat pooled(p_samples.rows() + q_samples.rows(), d);
  pooled << p_samples, q_samples;
  const Vec centre = sample_mean(pooled);
  Vec scale = sample_covariance(pooled).diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(scale(i) > 0.0)) scale(i) = 1.0;
  }
  const RowMat ps = (p_samples.rowwise() - centre.transpose()) * scale.cwiseInverse().asDiagonal();
  const RowMat qs = (q_samples.rowwise() - centre.transpose()) * scale.cwiseInverse().asDiagonal();

  DvProblem prob(ps, qs, options.family);
  const int np = prob.param().size();
  Vec best_th = Vec::Zero(np);
  double best_val = 0.0;
  const int per_start = options.evaluation_budget / std::max(1, options.restarts + 1);
  for (int r = 0; r <= options.restarts; ++r) {
    Vec start = Vec::Zero(np);
    if (r > 0) {
      CounterRng rng(options.seed, StreamTag::Restart, static_cast<std::uint64_t>(r));
      for (int i = 0; i < np; ++i) start(i) = 0.5 * rng.normal();
      if (prob.value(start) == kNegInf) start.setZero();
    }
    auto [th, val] = coordinate_ascent(prob, start, prob.evaluations() + per_start);
    if (val > best_val) {
      best_val = val;
      best_th = th;
    }
  }

  QuadraticTestFunction fs = prob.param().unpack(best_th);
  // Back to original coordinates: z = S^{-1}(x - centre).
  const Mat S_inv = scale.cwiseInverse().asDiagonal();
  QuadraticTestFunction f;
  f.Q = S_inv * fs.Q * S_inv;
  f.l = S_inv * fs.l - 2.0 * f.Q * centre;
  f.c = centre.dot(f.Q * centre) - (S_inv * fs.l).dot(centre);
  f.c -= log_mean_exp(log_f_all(q_samples, f));  // normalise to nu(f) = 1

  DivergenceEstimate est;
  est.estimator = Estimator::DvLowerBound;
  est.value = std::max(0.0, best_val);
  est.metadata["evaluations"] = prob.evaluations();
  est.metadata["objective"] = best_val;
  if (options.bootstrap_resamples >= 2) {
    std::vector<double> values(options.bootstrap_resamples);
    parallel_for(options.bootstrap_resamples, [&](std::int64_t b) {
      CounterRng rng(options.seed, StreamTag::Bootstrap, static_cast<std::uint64_t>(b));
      RowMat pb(ps.rows(), d);
      RowMat qb(qs.rows(), d);
      for (Eigen::Index i = 0; i < pb.rows(); ++i) pb.row(i) = ps.row(rng.below(ps.rows()));
      for (Eigen::Index i = 0; i < qb.rows(); ++i) qb.row(i) = qs.row(rng.below(qs.rows()));
      values[b] = dv_objective(pb, qb, fs);
    });
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= values.size();
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    est.uncertainty = std::sqrt(var / (values.size() - 1));
  }
  if (best_out) *best_out = f;
  return est;
}

}  // namespace kel
