#include "kel/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "kel/acceptance.hpp"
#include "kel/entropy_est.hpp"
#include "kel/error.hpp"
#include "kel/experiments.hpp"
#include "kel/gaussian.hpp"
#include "kel/gramian.hpp"
#include "kel/model_spec.hpp"
#include "kel/parallel.hpp"
#include "kel/report_io.hpp"
#include "kel/transport.hpp"

namespace kel {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config_path;
  int threads = 0;
  std::string out_dir = ".";
  std::vector<std::string> formats{"json", "csv"};
  std::string snapshot_format = "csv";

  void add(CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--threads", threads, "worker threads (default: KEL_THREADS or all cores)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", formats, "report formats: json,csv,svg")
        ->delimiter(',')
        ->check(CLI::IsMember({"json", "csv", "svg"}));
    sub->add_option("--snapshot-format", snapshot_format, "snapshot dump format")
        ->check(CLI::IsMember({"csv", "binary"}));
  }

  OutputFormats output_formats() const {
    auto has = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
    return {has("json"), has("csv"), has("svg")};
  }
};

// Model flags merged into the `model` entry of the configuration.
struct ModelFlags {
  std::string preset;
  int d = 1;
  double beta = 1.0, theta = 0.05, alpha = 0.0, b_amplitude = 0.0, damping = 1.0;
  std::vector<std::pair<const char*, CLI::Option*>> given;

  void add(CLI::App* sub) {
    given = {{"preset", sub->add_option("--preset", preset, "kinetic-ou | chain | granular | linear")},
             {"d", sub->add_option("--d", d, "block dimension")},
             {"beta", sub->add_option("--beta", beta)},
             {"theta", sub->add_option("--theta", theta)},
             {"alpha", sub->add_option("--alpha", alpha)},
             {"b_amplitude", sub->add_option("--b-amplitude", b_amplitude)},
             {"damping", sub->add_option("--damping", damping)}};
  }

  // Flags without --preset refine the subcommand's default model.
  void apply(Json& cfg, const char* key, const char* default_preset) const {
    bool any = false;
    for (const auto& g : given) any = any || g.second->count() > 0;
    if (!any) return;
    Json& m = cfg[key];
    if (m.is_string()) m = Json{{"preset", m}};
    if (m.is_null()) m = Json{{"preset", default_preset}};
    for (const auto& [name, opt] : given) {
      if (opt->count() == 0) continue;
      const std::string n = name;
      if (n == "preset") m[n] = preset;
      else if (n == "d") m[n] = d;
      else if (n == "beta") m[n] = beta;
      else if (n == "theta") m[n] = theta;
      else if (n == "alpha") m[n] = alpha;
      else if (n == "b_amplitude") m[n] = b_amplitude;
      else m[n] = damping;
    }
  }
};

// Run-size flags merged into top-level configuration keys.
struct RunFlags {
  long long n = 0;
  double h = 0.0, T = 0.0, every = 0.0;
  std::uint64_t seed = 0;
  CLI::Option *o_n = nullptr, *o_h = nullptr, *o_T = nullptr, *o_every = nullptr, *o_seed = nullptr;

  void add(CLI::App* sub) {
    o_n = sub->add_option("--N", n, "particles");
    o_h = sub->add_option("--step", h, "time step h");
    o_T = sub->add_option("--T", T, "horizon");
    o_every = sub->add_option("--snapshot-every", every);
    o_seed = sub->add_option("--seed", seed);
  }

  void apply(Json& cfg) const {
    if (o_n->count()) cfg["N"] = n;
    if (o_h->count()) cfg["h"] = h;
    if (o_T->count()) cfg["T"] = T;
    if (o_every->count()) cfg["snapshot_every"] = every;
    if (o_seed->count()) cfg["seed"] = seed;
  }
};

Json load_config(const std::string& path, const std::string& subcommand) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  require(in.good(), "cannot read config file '" + path + "'");
  Json cfg;
  try {
    cfg = Json::parse(in, nullptr, true, false);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::InvalidArgument, "config '" + path + "' is not valid JSON: " + e.what());
  }
  require(cfg.is_object(), "config must be a JSON object");
  if (cfg.contains("subcommand")) {
    require(cfg["subcommand"] == subcommand,
            "config is for subcommand '" + cfg["subcommand"].dump() + "', not '" + subcommand + "'");
    cfg.erase("subcommand");
  }
  return cfg;
}

void stamp(Json& out, const Json& config) {
  out["kel_version"] = version();
  out["config_hash"] = config_hash(config);
  out["config"] = config;
}

std::vector<double> time_grid(StrictReader& r, double default_T, double default_every) {
  if (r.has("t_grid")) {
    require(!r.has("T") && !r.has("snapshot_every"), "give either t_grid or T/snapshot_every");
    return r.need<std::vector<double>>("t_grid");
  }
  const double T = r.get<double>("T", default_T);
  const double every = r.get<double>("snapshot_every", default_every > 0.0 ? default_every : T);
  require(T > 0.0 && every > 0.0, "T and snapshot_every must be positive");
  const auto count = static_cast<long long>(std::llround(T / every));
  require(std::abs(static_cast<double>(count) * every - T) <= 1e-9 * T,
          "T must be a multiple of snapshot_every");
  std::vector<double> grid;
  for (long long k = 0; k <= count; ++k) grid.push_back(static_cast<double>(k) * every);
  return grid;
}

Json condition_json(const ConditionReport& c) {
  auto opt = [](const auto& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"kalman_index", opt(c.kalman_index)},
              {"dissipativity_delta", opt(c.dissipativity_delta)},
              {"dissipativity_worst_margin", c.dissipativity_worst_margin},
              {"theta1", c.theta1},
              {"theta2", c.theta2},
              {"kappa", opt(c.kappa)},
              {"twisted_a", opt(c.twisted_a)},
              {"twisted_r", opt(c.twisted_r)},
              {"theta_audit", opt(c.theta_audit)}};
}

Json estimate_json(const DivergenceEstimate& e) {
  Json j{{"value", e.value},
         {"estimator", to_string(e.estimator)},
         {"uncertainty", e.uncertainty ? Json(*e.uncertainty) : Json(nullptr)},
         {"converged", e.converged},
         {"metadata", e.metadata}};
  return j;
}

ProbePlan probe_plan_from(StrictReader& r) {
  ProbePlan plan;
  if (!r.has("probes")) return plan;
  StrictReader p(r.raw("probes"), "probes");
  plan.n_states = p.get<int>("n_states", plan.n_states);
  plan.n_directions = p.get<int>("n_directions", plan.n_directions);
  plan.box = p.get<double>("box", plan.box);
  plan.fd_step = p.get<double>("fd_step", plan.fd_step);
  plan.seed = p.get<std::uint64_t>("seed", plan.seed);
  p.finish();
  return plan;
}

Json probes_json(const ProbePlan& p) {
  return Json{{"n_states", p.n_states}, {"n_directions", p.n_directions}, {"box", p.box},
              {"fd_step", p.fd_step},   {"seed", p.seed}};
}

ModelSpec model_from(StrictReader& r, const char* key, const ModelSpec& fallback) {
  return r.has(key) ? model_spec_from_json(r.raw(key)) : fallback;
}

// ---- subcommands -------------------------------------------------------------

int cmd_check(Json cfg, std::ostream& out) {
  StrictReader r(cfg, "check config");
  const ModelSpec spec = model_from(r, "model", ModelSpec{});
  const double delta = r.get<double>("delta", 0.5);
  const ProbePlan plan = probe_plan_from(r);
  r.finish();
  const Json resolved{{"model", to_json(spec)}, {"delta", delta}, {"probes", probes_json(plan)}};
  Json j = condition_json(condition_report(build_model(spec), delta, plan));
  stamp(j, resolved);
  out << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_gramian(Json cfg, std::ostream& out) {
  StrictReader r(cfg, "gramian config");
  const ModelSpec spec = model_from(r, "model", ModelSpec{});
  const double t = r.get<double>("t", 1.0);
  const double s = r.get<double>("s", t);
  const int nodes = r.get<int>("nodes", 64);
  std::optional<FrozenTrajectory> along;
  if (r.has("x0")) along = FrozenTrajectory{vec_from_json(r.raw("x0"), "x0")};
  const auto s_grid = r.get<std::vector<double>>("s_grid", {});
  r.finish();
  const BlockModel model = build_model(spec);
  Json resolved{{"model", to_json(spec)}, {"t", t}, {"s", s}, {"nodes", nodes}};
  if (along) resolved["x0"] = to_json(along->x0);
  if (!s_grid.empty()) resolved["s_grid"] = s_grid;

  const GramianResult g = gramian_Q(model, t, s, nodes, along);
  Json j{{"Q", to_json(g.Q)}, {"t", g.t}, {"s", g.s}, {"lambda_min", g.lambda_min}, {"nodes", g.nodes}};
  if (!s_grid.empty()) {
    const ScalingResult sc = verify_gramian_scaling(model, t, s_grid, nodes);
    j["scaling"] = Json{{"slope", sc.slope},   {"intercept", sc.intercept},
                        {"r2", sc.r2},         {"expected_exponent", sc.expected_exponent},
                        {"c0", sc.c0},         {"s", sc.s},
                        {"lambda_min", sc.lambda_min}, {"margins", sc.margins}};
  }
  stamp(j, resolved);
  out << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_simulate(Json cfg, const CommonFlags& common, std::ostream& out) {
  StrictReader r(cfg, "simulate config");
  const ModelSpec spec = model_from(r, "model", granular_spec());
  const BlockModel model = build_model(spec);
  const InitialLaw init = r.has("initial") ? initial_law_from_json(r.raw("initial"), model.dim())
                                           : InitialLaw::point_mass(Vec::Zero(model.dim()));
  const auto n = r.get<Eigen::Index>("N", 1024);
  const double h = r.get<double>("h", 1e-3);
  const std::uint64_t seed = r.get<std::uint64_t>("seed", 20240611);
  const std::vector<double> grid = time_grid(r, 1.0, 0.0);
  r.finish();
  require(n >= 1, "N must be positive");
  const Json resolved{{"model", to_json(spec)}, {"initial", to_json(init)}, {"N", n},
                      {"h", h},                 {"t_grid", grid},           {"seed", seed}};

  const std::vector<Ensemble> snaps = simulate(model, init, n, h, grid, seed);
  const bool binary = common.snapshot_format == "binary";
  const fs::path path = fs::path(common.out_dir) / (binary ? "snapshots.bin" : "snapshots.csv");
  const std::string content = binary ? snapshots_binary(snaps, model.d1, resolved)
                                     : snapshots_csv(snaps, model.d1, resolved);
  fs::create_directories(common.out_dir);
  write_text(path, content);

  Json summary{{"files", {path.string()}}, {"snapshots", Json::array()}};
  for (const Ensemble& e : snaps) {
    summary["snapshots"].push_back(Json{{"t", e.time}, {"mean", to_json(Vec(e.states.colwise().mean().transpose()))}});
  }
  stamp(summary, resolved);
  out << summary.dump(2) << '\n';
  return kExitOk;
}

Json report_summary(const ExperimentReport& rep, const std::vector<fs::path>& files) {
  Json j{{"experiment", rep.id}, {"scalars", rep.scalars}, {"flags", rep.flags},
         {"notes", rep.notes},   {"files", Json::array()}};
  for (const auto& f : files) j["files"].push_back(f.string());
  stamp(j, rep.config);
  return j;
}

int cmd_couple(Json cfg, const CommonFlags& common, std::ostream& out) {
  StrictReader r(cfg, "couple config");
  const ModelSpec spec_x = model_from(r, "model_x", granular_spec());
  const ModelSpec spec_y = model_from(r, "model_y", spec_x);
  const BlockModel mx = build_model(spec_x);
  const BlockModel my = build_model(spec_y);
  require(mx.dim() == my.dim(), "coupled models must have the same dimension");
  InitialPair init;
  init.x = r.has("init_x") ? initial_law_from_json(r.raw("init_x"), mx.dim())
                           : InitialLaw::point_mass(Vec::Zero(mx.dim()));
  init.y = r.has("init_y") ? initial_law_from_json(r.raw("init_y"), mx.dim()) : init.x;
  const std::string coupling = r.get<std::string>("coupling", "independent");
  if (coupling == "same-point") init.coupling = CouplingKind::SamePoint;
  else if (coupling == "independent") init.coupling = CouplingKind::Independent;
  else if (coupling == "comonotone-by-index") init.coupling = CouplingKind::ComonotoneByIndex;
  else if (coupling == "optimal") init.coupling = CouplingKind::Optimal;
  else fail(ErrorCode::InvalidArgument, "unknown coupling '" + coupling + "'");
  const auto n = r.get<Eigen::Index>("N", 1024);
  const double h = r.get<double>("h", 1e-3);
  const std::uint64_t seed = r.get<std::uint64_t>("seed", 20240611);
  const std::vector<double> grid = time_grid(r, 1.0, 0.1);
  r.finish();

  ExperimentReport rep;
  rep.id = "couple";
  rep.seed = seed;
  rep.t_grid = grid;
  rep.config = Json{{"model_x", to_json(spec_x)}, {"model_y", to_json(spec_y)},
                    {"init_x", to_json(init.x)},  {"init_y", to_json(init.y)},
                    {"coupling", coupling},       {"N", n},
                    {"h", h},                     {"t_grid", grid},
                    {"seed", seed}};
  for (const CoupledSnapshot& s : couple_simulate(mx, my, init, n, h, grid, seed)) {
    rep.add(s.t, "mean_psi_bar_sq", s.mean_psi_bar_sq);
    rep.add(s.t, "mean_xi_sq", s.mean_xi_sq);
  }
  const auto files = write_report(rep, common.out_dir, common.output_formats());
  out << report_summary(rep, files).dump(2) << '\n';
  return kExitOk;
}

RowMat read_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot read point cloud '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      numeric = numeric && end != cell.c_str();
      row.push_back(v);
    }
    const bool header = first && !numeric;
    first = false;
    if (header) continue;
    require(numeric, "non-numeric entry in '" + path + "'");
    require(rows.empty() || row.size() == rows.front().size(), "ragged rows in '" + path + "'");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "point cloud '" + path + "' is empty");
  RowMat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = rows[i][c];
  }
  return m;
}

RowMat cloud_from(const Json& j, const std::string& what) {
  if (j.is_string()) return read_cloud_csv(j.get<std::string>());
  return mat_from_json(j, what);
}

GaussianState gaussian_from(const Json& j, const std::string& what) {
  StrictReader r(j, what);
  GaussianState g;
  g.mean = vec_from_json(r.raw("mean"), what + ".mean");
  g.cov = mat_from_json(r.raw("cov"), what + ".cov");
  r.finish();
  require(g.cov.rows() == g.mean.size() && g.cov.cols() == g.mean.size(), what + " has mismatched shapes");
  return g;
}

int cmd_divergence(Json cfg, std::ostream& out) {
  StrictReader r(cfg, "divergence config");
  const std::string estimator = r.get<std::string>("estimator", "auto");
  require(r.has("x") && r.has("y"), "divergence needs x and y");
  const Json jx = r.raw("x");
  const Json jy = r.raw("y");
  const int k = r.get<int>("k", 5);
  const std::uint64_t seed = r.get<std::uint64_t>("seed", 20240611);
  const int resamples = r.get<int>("resamples", 0);
  const double epsilon = r.get<double>("epsilon", 0.0);  // 0: scaled median cost
  const double epsilon_factor = r.get<double>("epsilon_factor", 0.01);
  const std::string cost_kind = r.get<std::string>("cost", "euclidean");
  const double beta = r.get<double>("beta", 1.0);
  r.finish();

  Json resolved{{"estimator", estimator}, {"x", jx}, {"y", jy}};
  DivergenceEstimate est;
  if (estimator == "gaussian-kl" || estimator == "gaussian-w2") {
    const GaussianState p = gaussian_from(jx, "x");
    const GaussianState q = gaussian_from(jy, "y");
    est.estimator = Estimator::GaussianClosedForm;
    est.value = estimator == "gaussian-kl" ? gaussian_kl(p, q) : gaussian_w2(p, q);
  } else {
    const DiscreteCloud x{cloud_from(jx, "x")};
    const DiscreteCloud y{cloud_from(jy, "y")};
    require(x.dim() == y.dim(), "x and y have different dimensions");
    GroundCost cost = GroundCost::euclidean();
    if (cost_kind == "twisted") {
      require(x.dim() % 2 == 0, "twisted cost needs two blocks of equal size");
      cost = GroundCost::twisted(beta, Mat::Identity(x.dim() / 2, x.dim() / 2));
      resolved["beta"] = beta;
    } else {
      require(cost_kind == "euclidean", "cost must be 'euclidean' or 'twisted'");
    }
    resolved["cost"] = cost_kind;
    if (estimator == "exact") {
      est = w2_exact(x, y, cost);
    } else if (estimator == "sinkhorn") {
      const double eps = epsilon > 0.0 ? epsilon : epsilon_factor * median_cost(x, y, cost);
      resolved["epsilon"] = eps;
      est = w2_sinkhorn(x, y, eps, {}, cost);
      if (!est.converged) fail(ErrorCode::NotConverged, "Sinkhorn did not reach the marginal tolerance");
    } else if (estimator == "auto") {
      resolved["resamples"] = resamples;
      resolved["seed"] = seed;
      est = w2_auto(x, y, resamples, seed, cost);
    } else if (estimator == "knn") {
      resolved["k"] = k;
      est = knn_kl(x.points, y.points, k);
    } else if (estimator == "dv") {
      DvOptions opt;
      opt.seed = seed;
      resolved["seed"] = seed;
      est = dv_lower_bound(x.points, y.points, opt);
    } else {
      fail(ErrorCode::InvalidArgument, "unknown estimator '" + estimator + "'");
    }
  }
  Json j = estimate_json(est);
  stamp(j, resolved);
  out << j.dump(2) << '\n';
  return kExitOk;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return g;
}

ExperimentReport run_entropy_inequality(const Json& cfg) {
  StrictReader r(cfg, "entropy-inequality config");
  r.get<std::string>("experiment", "");
  ModelSpec shifted;
  shifted.drift_shift = Vec::Constant(1, 0.5);
  const ModelSpec m1 = model_from(r, "model_1", shifted);
  const ModelSpec m2 = model_from(r, "model_2", ModelSpec{});
  const int dim = build_model(m2).dim();
  const GaussianState init = r.has("initial") ? gaussian_from(r.raw("initial"), "initial")
                                              : GaussianState::point(Vec::Zero(dim));
  const auto grid = r.get<std::vector<double>>("t_grid", linspace(0.1, 5.0, 50));
  BoundOptions opt;
  opt.quad_nodes = r.get<int>("quad_nodes", opt.quad_nodes);
  opt.t0 = r.get<double>("t0", opt.t0);
  opt.xi_constant = r.get<double>("xi_constant", opt.xi_constant);
  r.finish();
  return verify_entropy_inequality_gaussian(m1, m2, init, grid, opt);
}

ExperimentReport run_shorttime(const Json& cfg) {
  StrictReader r(cfg, "shorttime config");
  r.get<std::string>("experiment", "");
  const ModelSpec spec = model_from(r, "model", ModelSpec{});
  const int dim = build_model(spec).dim();
  const Vec x = r.has("x") ? vec_from_json(r.raw("x"), "x") : Vec::Zero(dim);
  Vec e0 = Vec::Zero(dim);
  e0(0) = 1.0;
  const Vec y = r.has("y") ? vec_from_json(r.raw("y"), "y") : e0;
  const auto grid = r.get<std::vector<double>>("t_grid", logspace(1e-3, 1e-2, 10));
  r.finish();
  return shorttime_scaling(spec, x, y, grid);
}

int cmd_experiment(const std::string& name, Json cfg, const CommonFlags& common, std::ostream& out,
                   std::ostream& err) {
  ExperimentReport rep;
  bool log_y = true;
  if (name == "entropy-inequality") {
    rep = run_entropy_inequality(cfg);
  } else if (name == "shorttime") {
    rep = run_shorttime(cfg);
  } else if (name == "coupling") {
    rep = coupling_contraction(coupling_params_from_json(cfg));
  } else if (name == "ergodicity") {
    rep = ergodicity_experiment(ergodicity_params_from_json(cfg));
  } else {
    fail(ErrorCode::InvalidArgument, "unknown experiment '" + name + "'");
  }
  const auto files = write_report(rep, common.out_dir, common.output_formats(), log_y);
  out << report_summary(rep, files).dump(2) << '\n';
  err << rep.id << ": " << rep.wall_clock_seconds << " s\n";
  const auto stationary = rep.flags.find("stationary");
  if (stationary != rep.flags.end() && !stationary->second) {
    err << "NotStationary: the terminal ensemble failed the stationarity audit\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_selftest(const std::vector<int>& criteria, bool artifacts_only, std::uint64_t seed,
                 const CommonFlags& common, std::ostream& out, std::ostream& err) {
  const fs::path dir = fs::path(common.out_dir) / "selftest";
  fs::remove_all(dir);
  const auto files = write_selftest_artifacts(dir, seed);
  err << "wrote " << files.size() << " artifacts to " << dir.string() << '\n';
  if (artifacts_only) return kExitOk;
  AcceptanceOptions opt;
  opt.seed = seed;
  int failed = 0;
  for (int id : criteria) {
    const CriterionResult res = run_criterion(id, opt);
    out << format_result_line(res) << '\n' << std::flush;
    failed += res.pass ? 0 : 1;
  }
  out << "selftest: " << criteria.size() - failed << "/" << criteria.size() << " passed\n";
  return failed == 0 ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kinetic entropy and contraction toolkit", "kel"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);

  CommonFlags common;
  ModelFlags model_flags;
  RunFlags run_flags;

  auto* check = app.add_subcommand("check", "structural conditions and closed-form constants");
  common.add(check);
  model_flags.add(check);
  double delta = 0.0;
  auto* o_delta = check->add_option("--delta", delta, "dissipativity margin to test");

  auto* gramian = app.add_subcommand("gramian", "controllability-type Gramian Q_{t,s}");
  CommonFlags gramian_common;
  ModelFlags gramian_model;
  gramian_common.add(gramian);
  gramian_model.add(gramian);
  double t = 1.0, s = 1.0;
  int nodes = 64;
  auto* o_t = gramian->add_option("--t", t);
  auto* o_s = gramian->add_option("--s", s);
  auto* o_nodes = gramian->add_option("--nodes", nodes, "Gauss-Legendre nodes");

  auto* simulate_cmd = app.add_subcommand("simulate", "Euler-Maruyama particle simulation");
  CommonFlags sim_common;
  ModelFlags sim_model;
  RunFlags sim_run;
  sim_common.add(simulate_cmd);
  sim_model.add(simulate_cmd);
  sim_run.add(simulate_cmd);

  auto* couple = app.add_subcommand("couple", "synchronous coupling of two particle systems");
  CommonFlags couple_common;
  RunFlags couple_run;
  couple_common.add(couple);
  couple_run.add(couple);

  auto* divergence = app.add_subcommand("divergence", "W2 / KL between point clouds or Gaussians");
  CommonFlags div_common;
  div_common.add(divergence);
  std::string est_name, x_path, y_path;
  int knn_k = 5;
  auto* o_est = divergence->add_option("--estimator", est_name,
                                       "auto | exact | sinkhorn | knn | dv | gaussian-kl | gaussian-w2");
  auto* o_x = divergence->add_option("--x", x_path, "CSV point cloud");
  auto* o_y = divergence->add_option("--y", y_path, "CSV point cloud");
  auto* o_k = divergence->add_option("--k", knn_k, "neighbours for knn");

  auto* experiment = app.add_subcommand("experiment", "named experiment producing a report");
  CommonFlags exp_common;
  ModelFlags exp_model;
  RunFlags exp_run;
  exp_common.add(experiment);
  exp_model.add(experiment);
  exp_run.add(experiment);
  std::string exp_name;
  experiment->add_option("name", exp_name, "entropy-inequality | shorttime | coupling | ergodicity")
      ->required()
      ->check(CLI::IsMember({"entropy-inequality", "shorttime", "coupling", "ergodicity"}));

  auto* selftest = app.add_subcommand("selftest", "acceptance suite and deterministic artifacts");
  CommonFlags self_common;
  self_common.add(selftest);
  std::vector<int> criteria;
  for (int i = 1; i <= kCriterionCount; ++i) criteria.push_back(i);
  std::uint64_t self_seed = 20240611;
  bool artifacts_only = false;
  selftest->add_option("--criteria", criteria, "criterion ids")->delimiter(',')->check(CLI::Range(1, kCriterionCount));
  selftest->add_option("--seed", self_seed);
  selftest->add_flag("--artifacts-only", artifacts_only, "write artifacts, skip the criteria");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    const CommonFlags* active = &common;
    if (*gramian) active = &gramian_common;
    else if (*simulate_cmd) active = &sim_common;
    else if (*couple) active = &couple_common;
    else if (*divergence) active = &div_common;
    else if (*experiment) active = &exp_common;
    else if (*selftest) active = &self_common;
    set_threads(resolve_threads(active->threads));

    const std::string sub = app.get_subcommands().front()->get_name();
    Json cfg = load_config(active->config_path, sub);

    if (*check) {
      model_flags.apply(cfg, "model", "kinetic-ou");
      if (o_delta->count()) cfg["delta"] = delta;
      return cmd_check(std::move(cfg), out);
    }
    if (*gramian) {
      gramian_model.apply(cfg, "model", "kinetic-ou");
      if (o_t->count()) cfg["t"] = t;
      if (o_s->count()) cfg["s"] = s;
      if (o_nodes->count()) cfg["nodes"] = nodes;
      return cmd_gramian(std::move(cfg), out);
    }
    if (*simulate_cmd) {
      sim_model.apply(cfg, "model", "granular");
      sim_run.apply(cfg);
      return cmd_simulate(std::move(cfg), sim_common, out);
    }
    if (*couple) {
      couple_run.apply(cfg);
      return cmd_couple(std::move(cfg), couple_common, out);
    }
    if (*divergence) {
      if (o_est->count()) cfg["estimator"] = est_name;
      if (o_x->count()) cfg["x"] = x_path;
      if (o_y->count()) cfg["y"] = y_path;
      if (o_k->count()) cfg["k"] = knn_k;
      return cmd_divergence(std::move(cfg), out);
    }
    if (*experiment) {
      exp_model.apply(cfg, "model",
                      exp_name == "coupling" || exp_name == "ergodicity" ? "granular" : "kinetic-ou");
      exp_run.apply(cfg);
      return cmd_experiment(exp_name, std::move(cfg), exp_common, out, err);
    }
    return cmd_selftest(criteria, artifacts_only, self_seed, self_common, out, err);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return is_validation_error(e.code()) ? kExitValidation : kExitNumerical;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace kel
