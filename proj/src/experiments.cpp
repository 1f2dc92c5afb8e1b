#include "kel/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "kel/entropy_est.hpp"
#include "kel/error.hpp"
#include "kel/quadrature.hpp"
#include "kel/rng.hpp"
#include "kel/transport.hpp"

namespace kel {

void ExperimentReport::add(double t, std::string quantity, double value,
                           std::optional<double> stderr_value) {
  records.push_back({t, std::move(quantity), value, stderr_value});
}

std::vector<std::pair<double, double>> ExperimentReport::series(const std::string& quantity) const {
  std::vector<std::pair<double, double>> out;
  for (const Record& r : records) {
    if (r.quantity == quantity) out.emplace_back(r.t, r.value);
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> uniform_grid(double T, double every) {
  require(every > 0.0 && T > 0.0, "grid spacing and horizon must be positive");
  const auto n = static_cast<long>(std::llround(T / every));
  require(std::abs(n * every - T) <= 1e-9 * T, "horizon must be a multiple of the snapshot spacing");
  std::vector<double> g;
  for (long i = 0; i <= n; ++i) g.push_back(static_cast<double>(i) * every);
  return g;
}

// Minimal-norm preimages under a symmetric PSD matrix (pseudo-inverse built
// once, reused for many right-hand sides).
class RangeSolver {
 public:
  explicit RangeSolver(const Mat& root) : root_(root) {
    Eigen::SelfAdjointEigenSolver<Mat> es(root);
    const Vec& ev = es.eigenvalues();
    const double cut = 1e-12 * std::max(1e-300, ev.cwiseAbs().maxCoeff());
    Vec inv = Vec::Zero(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > cut) inv(i) = 1.0 / ev(i);
    }
    pinv_ = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  }

  // Norm of the preimage; throws when v leaves the range.
  double preimage_norm(const Vec& v, const char* what) const {
    const Vec w = pinv_ * v;
    if ((root_ * w - v).norm() > 1e-9 * std::max(1.0, v.norm())) {
      fail(ErrorCode::DriftDifferenceOutsideRange,
           std::string(what) + " has a component outside the range of the noise");
    }
    return w.norm();
  }

 private:
  Mat root_;
  Mat pinv_;
};

std::vector<Vec> probe_states(int dim, const ProbePlan& plan) {
  std::vector<Vec> states{Vec::Zero(dim)};
  for (int i = 0; i < plan.n_states; ++i) {
    CounterRng rng(plan.seed, StreamTag::Probe, static_cast<std::uint64_t>(i));
    Vec x(dim);
    for (int c = 0; c < dim; ++c) x(c) = plan.box * (2.0 * rng.uniform() - 1.0);
    states.push_back(std::move(x));
  }
  return states;
}

Json to_json(const BoundOptions& o) {
  return Json{{"quad_nodes", o.quad_nodes},
              {"t0", o.t0},
              {"grid_points", o.grid.n_states},
              {"grid_box", o.grid.box},
              {"grid_seed", o.grid.seed},
              {"xi_constant", o.xi_constant}};
}

Json grid_json(const std::vector<double>& g) { return Json(g); }

}  // namespace

double entropy_bound_rhs(const BlockModel& model_1, const BlockModel& model_2, double t,
                           const BoundOptions& options) {
  require(t > 0.0, "bound needs t > 0");
  require(options.t0 >= 0.0 && options.t0 < t, "bound needs 0 <= t0 < t");
  require(model_1.d1 == model_2.d1 && model_1.d2 == model_2.d2, "models differ in block sizes");
  const int d1 = model_2.d1;
  const int d2 = model_2.d2;
  const std::vector<Vec> probes = probe_states(model_2.dim(), options.grid);

  for (const Vec& x : probes) {
    const Vec diff = model_1.first_block_drift(x, nullptr) - model_2.first_block_drift(x, nullptr);
    const double scale = 1.0 + model_2.first_block_drift(x, nullptr).norm();
    if (diff.norm() > 1e-12 * scale) {
      fail(ErrorCode::DriftDifferenceOutsideRange,
           "drift difference in the noise-free block; the bound is infinite");
    }
  }

  bool z1_ignores_x1 = true;
  for (const Vec& x : probes) {
    if (model_1.jacobian_Z(0.5 * t, x).leftCols(d1).norm() > 1e-10) {
      z1_ignores_x1 = false;
      break;
    }
  }
  const int k = kalman_index(model_2.A, model_2.B);
  const double xi_power = z1_ignores_x1 ? 2.0 * k + 0.5 : 2.0 * k + 1.5;

  const QuadratureRule rule = gauss_legendre(options.quad_nodes, options.t0, t);
  double integral = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const double s = rule.nodes[q];
    const Mat s1 = model_1.diffusion(s, nullptr);
    const Mat s2 = model_2.diffusion(s, nullptr);
    const Mat a1 = 0.5 * s1 * s1.transpose();
    const Mat a2 = 0.5 * s2 * s2.transpose();
    const RangeSolver root(sym_sqrt(a2));
    double drift_term = 0.0;
    for (const Vec& x : probes) {
      const Vec dz = model_1.second_block_drift(s, x, nullptr) - model_2.second_block_drift(s, x, nullptr);
      drift_term = std::max(drift_term, root.preimage_norm(dz, "drift difference"));
    }
    double h_term = 0.0;
    const Mat da = a1 - a2;
    if (da.norm() > 0.0) {
      if (!(options.t0 > 0.0)) {
        fail(ErrorCode::InvalidArgument, "diffusions differ: the bound needs t0 > 0");
      }
      double column_sum = 0.0;
      for (int j = 0; j < d2; ++j) column_sum += root.preimage_norm(da.col(j), "diffusion difference");
      h_term = options.xi_constant * std::pow(s, -xi_power) * column_sum;
    }
    const double integrand = drift_term + h_term;
    integral += rule.weights[q] * integrand * integrand;
  }
  return 0.25 * integral;
}

ExperimentReport verify_entropy_inequality_gaussian(const ModelSpec& spec_1, const ModelSpec& spec_2,
                                                    const GaussianState& initial,
                                                    const std::vector<double>& t_grid,
                                                    const BoundOptions& options) {
  const auto start = Clock::now();
  const BlockModel m1 = build_model(spec_1);
  const BlockModel m2 = build_model(spec_2);
  require(m1.linear && m2.linear, "entropy inequality check needs linear models");
  require((m1.diffusion(0.0, nullptr) - m2.diffusion(0.0, nullptr)).norm() == 0.0,
          "entropy inequality check needs equal diffusions");
  require(initial.mean.size() == m1.dim(), "initial law dimension mismatch");

  ExperimentReport rep;
  rep.id = "entropy-inequality";
  rep.config = Json{{"experiment", rep.id},
                    {"model_1", to_json(spec_1)},
                    {"model_2", to_json(spec_2)},
                    {"initial", {{"mean", to_json(initial.mean)}, {"cov", to_json(initial.cov)}}},
                    {"t_grid", grid_json(t_grid)},
                    {"bound", to_json(options)}};
  rep.t_grid = t_grid;
  const LinearForm f1 = linear_form(m1);
  const LinearForm f2 = linear_form(m2);
  bool nonnegative = true;
  bool positive = true;
  double max_ratio = 0.0;
  // March both laws along the (increasing) grid.
  GaussianState p = initial;
  GaussianState q = initial;
  double t_prev = 0.0;
  for (double t : t_grid) {
    require(t > t_prev, "time grid must be positive and strictly increasing");
    p = propagate_linear(f1.F, f1.G, f1.u, p, t - t_prev);
    q = propagate_linear(f2.F, f2.G, f2.u, q, t - t_prev);
    t_prev = t;
    const double kl = gaussian_kl(p, q);
    const double bound = entropy_bound_rhs(m1, m2, t, options);
    const double margin = bound - kl;
    rep.add(t, "exact_kl", kl);
    rep.add(t, "bound", bound);
    rep.add(t, "margin", margin);
    if (bound > 0.0) {
      rep.add(t, "ratio", kl / bound);
      max_ratio = std::max(max_ratio, kl / bound);
    }
    nonnegative = nonnegative && margin >= 0.0;
    positive = positive && margin > 0.0;
  }
  rep.flags["margins_nonnegative"] = nonnegative;
  rep.flags["margins_positive"] = positive;
  rep.scalars["max_ratio"] = max_ratio;
  rep.wall_clock_seconds = seconds_since(start);
  return rep;
}

ExperimentReport shorttime_scaling(const ModelSpec& spec, const Vec& x, const Vec& y,
                                   const std::vector<double>& t_grid) {
  const auto start = Clock::now();
  const BlockModel model = build_model(spec);
  require(model.linear, "short-time scaling needs a linear model");
  require((x - y).norm() > 0.0, "short-time scaling needs distinct starting points");
  ExperimentReport rep;
  rep.id = "shorttime-scaling";
  rep.config = Json{{"experiment", rep.id},
                    {"model", to_json(spec)},
                    {"x", to_json(x)},
                    {"y", to_json(y)},
                    {"t_grid", grid_json(t_grid)}};
  rep.t_grid = t_grid;
  const std::vector<CurvePoint> curve = entropy_cost_curve(model, x, y, t_grid);
  std::vector<std::pair<double, double>> series;
  for (const CurvePoint& p : curve) {
    if (!p.valid) {
      rep.notes.push_back("t=" + std::to_string(p.t) + " skipped: kernel covariance singular");
      continue;
    }
    rep.add(p.t, "kl", p.kl);
    series.emplace_back(p.t, p.kl);
  }
  const FitResult fit = rate_fit(series, FitMode::PowerLaw);
  const int k = kalman_index(model.A, model.B);
  const double expected = -(4.0 * k + 3.0);
  const double tol = 0.1 * (4.0 * k + 3.0);
  rep.fits["log_kl_vs_log_t"] = fit;
  rep.scalars["kalman_index"] = k;
  rep.scalars["slope"] = fit.slope;
  rep.scalars["expected_slope"] = expected;
  rep.scalars["tolerance"] = tol;
  rep.flags["within_tolerance"] = std::abs(fit.slope - expected) <= tol;
  // The kernel bound only requires KL to blow up no faster than t^expected.
  rep.flags["consistent_with_bound"] = fit.slope >= expected - tol;
  rep.wall_clock_seconds = seconds_since(start);
  return rep;
}

ExperimentReport coupling_contraction(const CouplingParams& p) {
  const auto start = Clock::now();
  const BlockModel model = build_model(p.model);
  require(model.mean_field.has_value(), "coupling contraction needs the granular preset");
  const MeanFieldSpec& mf = *model.mean_field;
  const GranularThetas th = granular_thetas(mf.theta, mf.alpha, mf.beta);
  const double kap = kappa(mf.beta, th.theta1, th.theta2);
  const std::vector<double> grid = uniform_grid(p.T, p.snapshot_every);
  const TwistSpec twist{mf.beta, model.B};

  ExperimentReport rep;
  rep.id = "coupling-contraction";
  rep.config = to_json(p);
  rep.t_grid = grid;
  rep.seed = p.seed;
  const std::vector<CoupledSnapshot> snaps =
      couple_simulate(model, model, p.init, p.n, p.h, grid, p.seed, twist);
  bool degenerate = true;
  for (const CoupledSnapshot& s : snaps) {
    rep.add(s.t, "mean_psi_bar_sq", s.mean_psi_bar_sq);
    rep.add(s.t, "mean_xi_sq", s.mean_xi_sq);
    degenerate = degenerate && s.mean_psi_bar_sq == 0.0;
  }
  if (degenerate) {
    fail(ErrorCode::DegenerateSeries, "coupled difference is identically zero; no rate to fit");
  }
  const FitResult fit = rate_fit(rep.series("mean_psi_bar_sq"), FitMode::Exponential,
                                 FitWindow{p.burn_in_fraction * p.T, p.T});
  const double rate = -fit.slope;
  rep.fits["log_mean_psi_bar_sq"] = fit;
  rep.scalars["theta1"] = th.theta1;
  rep.scalars["theta2"] = th.theta2;
  rep.scalars["kappa"] = kap;
  rep.scalars["fitted_rate"] = rate;
  rep.scalars["required_rate"] = 2.0 * p.safety * kap;
  rep.flags["pass"] = rate >= 2.0 * p.safety * kap;
  if (p.replay_check) {
    const std::vector<CoupledSnapshot> again =
        couple_simulate(model, model, p.init, p.n, p.h, grid, p.seed, twist);
    bool same = again.size() == snaps.size();
    for (std::size_t i = 0; same && i < snaps.size(); ++i) {
      same = identical(snaps[i].pair.x, again[i].pair.x) && identical(snaps[i].pair.y, again[i].pair.y);
    }
    rep.flags["replay_identical"] = same;
  }
  rep.wall_clock_seconds = seconds_since(start);
  return rep;
}

namespace {

RowMat take_rows(const RowMat& src, const std::vector<Eigen::Index>& idx) {
  RowMat out(static_cast<Eigen::Index>(idx.size()), src.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(idx[i]);
  return out;
}

double w2_value(const RowMat& a, const RowMat& b) {
  return w2_auto(DiscreteCloud{a}, DiscreteCloud{b}, 0, 0).value;
}

// Mean W2 between random halves of the cloud.
double split_noise_floor(const RowMat& cloud, int splits, std::uint64_t seed) {
  const Eigen::Index n = cloud.rows();
  const Eigen::Index half = n / 2;
  double total = 0.0;
  for (int s = 0; s < splits; ++s) {
    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    CounterRng rng(seed, StreamTag::Split, static_cast<std::uint64_t>(s));
    for (Eigen::Index i = n - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
    }
    const std::vector<Eigen::Index> a(perm.begin(), perm.begin() + half);
    const std::vector<Eigen::Index> b(perm.begin() + half, perm.begin() + 2 * half);
    total += w2_value(take_rows(cloud, a), take_rows(cloud, b));
  }
  return total / splits;
}

double bootstrap_mean_stderr(const Vec& terms, int resamples, std::uint64_t seed,
                             std::uint64_t stream) {
  const Eigen::Index n = terms.size();
  std::vector<double> means(resamples);
  for (int b = 0; b < resamples; ++b) {
    CounterRng rng(seed, StreamTag::Bootstrap, (stream << 20) | static_cast<std::uint64_t>(b));
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += terms(static_cast<Eigen::Index>(rng.below(n)));
    means[b] = s / static_cast<double>(n);
  }
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / resamples;
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  return std::sqrt(var / (resamples - 1));
}

}  // namespace

ExperimentReport ergodicity_experiment(const ErgodicityParams& p) {
  const auto start = Clock::now();
  const BlockModel model = build_model(p.model);
  require(model.mean_field.has_value(), "ergodicity experiment needs the granular preset");
  require(p.bootstrap_resamples >= 2, "need at least two bootstrap resamples");
  const MeanFieldSpec& mf = *model.mean_field;
  const GranularThetas th = granular_thetas(mf.theta, mf.alpha, mf.beta);
  const double kap = kappa(mf.beta, th.theta1, th.theta2);
  const std::vector<double> grid = uniform_grid(p.T, p.snapshot_every);

  ExperimentReport rep;
  rep.id = "ergodicity";
  rep.config = to_json(p);
  rep.t_grid = grid;
  rep.seed = p.seed;
  rep.scalars["kappa"] = kap;
  rep.scalars["kappa_prime"] = kap;

  std::vector<Ensemble> snaps = simulate(model, p.start, p.n, p.h, grid, p.seed);
  const RowMat mu_bar = snaps.back().states;
  if (p.restart_from_equilibrium) {
    Ensemble restart = make_ensemble(mu_bar, p.seed + 1);
    snaps = simulate_from(model, std::move(restart), p.h, grid);
  }

  const double floor = split_noise_floor(mu_bar, p.bootstrap_resamples, p.seed);
  rep.scalars["noise_floor_w2"] = floor;
  const auto audit_index = static_cast<std::size_t>(std::llround(0.8 * (grid.size() - 1)));
  const double audit = w2_value(snaps[audit_index].states, snaps.back().states);
  rep.scalars["stationarity_audit_w2"] = audit;
  rep.flags["stationary"] = audit <= p.stationarity_tolerance * floor;

  // The terminal snapshot is mu_bar itself; it is excluded from both curves.
  std::vector<double> kl_se;
  for (std::size_t g = 0; g + 1 < snaps.size(); ++g) {
    const double t = grid[g];
    const double w2 = w2_value(snaps[g].states, mu_bar);
    rep.add(t, "w2", w2);
    rep.add(t, "w2_sq", w2 * w2);
    const Vec terms = knn_kl_terms(snaps[g].states, mu_bar, p.knn_k);
    const double raw = terms.mean() + std::log(static_cast<double>(mu_bar.rows()) /
                                               static_cast<double>(snaps[g].states.rows() - 1));
    const double se = bootstrap_mean_stderr(terms, p.bootstrap_resamples, p.seed, g);
    rep.add(t, "kl_knn", std::max(0.0, raw), se);
    kl_se.push_back(se);
  }
  if (!rep.flags["stationary"]) {
    rep.notes.push_back("stationarity audit failed; no rates fitted");
    rep.wall_clock_seconds = seconds_since(start);
    return rep;
  }

  const double t_burn = p.burn_in_fraction * p.T;
  std::vector<std::pair<double, double>> w2_fit_series;
  for (const auto& [t, v] : rep.series("w2_sq")) {
    if (t >= t_burn && v >= p.floor_multiple * floor * floor) w2_fit_series.emplace_back(t, v);
  }
  if (w2_fit_series.size() >= 4) {
    const FitResult fit = rate_fit(w2_fit_series, FitMode::Exponential);
    rep.fits["log_w2_sq"] = fit;
    rep.scalars["w2_sq_rate"] = -fit.slope;
    rep.scalars["required_rate"] = 2.0 * p.safety * kap;
    rep.flags["w2_rate_pass"] = -fit.slope >= 2.0 * p.safety * kap;
  } else {
    rep.notes.push_back("fewer than 4 W2^2 points above the noise floor after burn-in");
    rep.flags["w2_rate_pass"] = false;
  }

  const auto kl = rep.series("kl_knn");
  bool monotone = true;
  double worst_increase = -INFINITY;
  std::vector<std::pair<double, double>> kl_fit_series;
  for (std::size_t i = 0; i < kl.size(); ++i) {
    if (kl[i].first < t_burn) continue;
    if (kl[i].second >= p.floor_multiple * kl_se[i]) kl_fit_series.push_back(kl[i]);
    if (i + 1 < kl.size()) {
      const double allowed = 2.0 * std::hypot(kl_se[i], kl_se[i + 1]);
      const double increase = kl[i + 1].second - kl[i].second;
      worst_increase = std::max(worst_increase, increase - allowed);
      monotone = monotone && increase <= allowed;
    }
  }
  rep.flags["kl_monotone"] = monotone;
  rep.scalars["kl_worst_excess_increase"] = worst_increase;
  if (kl_fit_series.size() >= 4) {
    const FitResult fit = rate_fit(kl_fit_series, FitMode::Exponential);
    rep.fits["log_kl"] = fit;
    rep.scalars["kl_rate"] = -fit.slope;
    if (rep.scalars.count("w2_sq_rate")) {
      const double ratio = rep.scalars["kl_rate"] / rep.scalars["w2_sq_rate"];
      rep.flags["kl_rate_within_factor_2"] = ratio >= 0.5 && ratio <= 2.0;
    }
  } else {
    rep.notes.push_back("fewer than 4 KL points above the noise level after burn-in; no KL rate");
  }
  rep.wall_clock_seconds = seconds_since(start);
  return rep;
}

// ---- configuration echo ------------------------------------------------------

namespace {

const char* coupling_name(CouplingKind k) {
  switch (k) {
    case CouplingKind::SamePoint: return "same-point";
    case CouplingKind::Independent: return "independent";
    case CouplingKind::ComonotoneByIndex: return "comonotone-by-index";
    case CouplingKind::Optimal: return "optimal";
  }
  return "independent";
}

CouplingKind coupling_from(const std::string& s) {
  if (s == "same-point") return CouplingKind::SamePoint;
  if (s == "independent") return CouplingKind::Independent;
  if (s == "comonotone-by-index") return CouplingKind::ComonotoneByIndex;
  if (s == "optimal") return CouplingKind::Optimal;
  fail(ErrorCode::InvalidArgument, "unknown coupling '" + s + "'");
}

}  // namespace

Json to_json(const CouplingParams& p) {
  return Json{{"experiment", "coupling-contraction"},
              {"model", to_json(p.model)},
              {"init_x", to_json(p.init.x)},
              {"init_y", to_json(p.init.y)},
              {"coupling", coupling_name(p.init.coupling)},
              {"N", p.n},
              {"h", p.h},
              {"T", p.T},
              {"snapshot_every", p.snapshot_every},
              {"burn_in_fraction", p.burn_in_fraction},
              {"safety", p.safety},
              {"seed", p.seed},
              {"replay_check", p.replay_check}};
}

CouplingParams coupling_params_from_json(const Json& j) {
  StrictReader r(j, "coupling-contraction config");
  CouplingParams p;
  r.get<std::string>("experiment", "coupling-contraction");
  if (r.has("model")) p.model = model_spec_from_json(r.raw("model"));
  const int dim = build_model(p.model).dim();
  p.init.x = r.has("init_x") ? initial_law_from_json(r.raw("init_x"), dim)
                             : InitialLaw::point_mass(Vec::Zero(dim));
  p.init.y = r.has("init_y") ? initial_law_from_json(r.raw("init_y"), dim) : p.init.x;
  p.init.coupling = coupling_from(r.get<std::string>("coupling", "independent"));
  p.n = r.get<Eigen::Index>("N", p.n);
  p.h = r.get<double>("h", p.h);
  p.T = r.get<double>("T", p.T);
  p.snapshot_every = r.get<double>("snapshot_every", p.snapshot_every);
  p.burn_in_fraction = r.get<double>("burn_in_fraction", p.burn_in_fraction);
  p.safety = r.get<double>("safety", p.safety);
  p.seed = r.get<std::uint64_t>("seed", p.seed);
  p.replay_check = r.get<bool>("replay_check", p.replay_check);
  r.finish();
  return p;
}

Json to_json(const ErgodicityParams& p) {
  return Json{{"experiment", "ergodicity"},
              {"model", to_json(p.model)},
              {"start", to_json(p.start)},
              {"N", p.n},
              {"h", p.h},
              {"T", p.T},
              {"snapshot_every", p.snapshot_every},
              {"burn_in_fraction", p.burn_in_fraction},
              {"safety", p.safety},
              {"knn_k", p.knn_k},
              {"bootstrap_resamples", p.bootstrap_resamples},
              {"stationarity_tolerance", p.stationarity_tolerance},
              {"floor_multiple", p.floor_multiple},
              {"restart_from_equilibrium", p.restart_from_equilibrium},
              {"seed", p.seed}};
}

ErgodicityParams ergodicity_params_from_json(const Json& j) {
  StrictReader r(j, "ergodicity config");
  ErgodicityParams p;
  r.get<std::string>("experiment", "ergodicity");
  if (r.has("model")) p.model = model_spec_from_json(r.raw("model"));
  const int dim = build_model(p.model).dim();
  p.start = r.has("start") ? initial_law_from_json(r.raw("start"), dim)
                           : InitialLaw::point_mass(Vec::Zero(dim));
  p.n = r.get<Eigen::Index>("N", p.n);
  p.h = r.get<double>("h", p.h);
  p.T = r.get<double>("T", p.T);
  p.snapshot_every = r.get<double>("snapshot_every", p.snapshot_every);
  p.burn_in_fraction = r.get<double>("burn_in_fraction", p.burn_in_fraction);
  p.safety = r.get<double>("safety", p.safety);
  p.knn_k = r.get<int>("knn_k", p.knn_k);
  p.bootstrap_resamples = r.get<int>("bootstrap_resamples", p.bootstrap_resamples);
  p.stationarity_tolerance = r.get<double>("stationarity_tolerance", p.stationarity_tolerance);
  p.floor_multiple = r.get<double>("floor_multiple", p.floor_multiple);
  p.restart_from_equilibrium = r.get<bool>("restart_from_equilibrium", p.restart_from_equilibrium);
  p.seed = r.get<std::uint64_t>("seed", p.seed);
  r.finish();
  return p;
}

}  // namespace kel
