#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "kel/linalg.hpp"

namespace kel {

// Moments of the (empirical) law the coefficients are allowed to see, plus an
// optional handle on the particle cloud for kernel averages.
struct MeasureSummary {
  Vec mean;
  Mat cov;
  const RowMat* particles = nullptr;
};

using FirstBlockDrift = std::function<Vec(const Vec& x, const MeasureSummary* mu)>;
using SecondBlockDrift = std::function<Vec(double t, const Vec& x, const MeasureSummary* mu)>;
using DriftJacobian = std::function<Mat(const Vec& x)>;
using TimedDriftJacobian = std::function<Mat(double t, const Vec& x)>;
using DiffusionCoefficient = std::function<Mat(double t, const MeasureSummary* mu)>;
// Full-state drift of every particle at once (rows of `states`), including
// the mean-field term. Must agree with the per-particle drift maps.
using BatchDrift =
    std::function<void(double t, const RowMat& states, const MeasureSummary* mu, RowMat& out)>;

// Mean-field interaction of granular-media type: the second block receives
// -B^T * grad V(x1, mu) with grad V(x1, mu) = mean_z grad_W(x1, z).
struct MeanFieldSpec {
  std::function<Vec(const Vec& v, const Vec& z)> grad_W;
  // grad_W affine in z: the kernel average equals grad_W(v, mean of mu), which
  // is exact and O(N) per step.
  bool grad_W_affine_in_z = false;
  std::function<Mat(const MeasureSummary& mu)> sigma_of_measure;
  double beta = 1.0;
  // Declared Lipschitz constant of grad_W and W2-Lipschitz constant of sigma
  // (||sigma(mu)-sigma(nu)||_HS^2 <= alpha W2^2).
  double theta = 0.0;
  double alpha = 0.0;
};

// dX1 = (A X1 + B X2 + b(X)) dt
// dX2 = Z(t, X) dt [- B^T grad V(X1, L_X) dt] + sigma(t) dW
struct BlockModel {
  std::string name;
  int d1 = 1;
  int d2 = 1;
  Mat A;
  Mat B;
  FirstBlockDrift b;         // empty means b == 0
  DriftJacobian jac_b;       // d1 x (d1+d2); empty means finite differences
  SecondBlockDrift Z;        // empty means Z == 0
  TimedDriftJacobian jac_Z;  // d2 x (d1+d2)
  DiffusionCoefficient sigma;
  std::optional<MeanFieldSpec> mean_field;
  BatchDrift batch_drift;  // optional vectorized path used by the integrator
  // Coefficients are affine in the state and sigma is constant.
  bool linear = false;
  bool nondegenerate_noise = true;
  double sigma_condition_cap = 1e12;

  int dim() const { return d1 + d2; }

  Vec first_block_drift(const Vec& x, const MeasureSummary* mu) const;
  // Second-block drift including the mean-field interaction when present.
  Vec second_block_drift(double t, const Vec& x, const MeasureSummary* mu) const;
  Mat diffusion(double t, const MeasureSummary* mu) const;
  Mat jacobian_b(const Vec& x, double fd_step = 1e-5) const;
  Mat jacobian_Z(double t, const Vec& x, double fd_step = 1e-5) const;
  // Drift of every row; uses batch_drift when present.
  void drift_all(double t, const RowMat& states, const MeasureSummary* mu, RowMat& out) const;
  void validate() const;
};

// Central finite-difference Jacobian of f: R^n -> R^m with relative step.
Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double rel_step = 1e-5);

// Affine form dX = (F X + u) dt + G dW of a linear model.
struct LinearForm {
  Mat F;
  Vec u;
  Mat G;
};
LinearForm linear_form(const BlockModel& model);

// ---- presets ---------------------------------------------------------------

// A=0, B=I, b=0, Z=-x1-x2, sigma=sqrt(2) I.
BlockModel kinetic_ou(int d = 1);

// Integrator chain with Kalman index 1: d1=2, d2=1, A=[[0,1],[0,0]],
// B=(0,1)^T, Z=-damping*x2, sigma=sqrt(2).
BlockModel chain_model(double damping = 1.0);

struct GranularParams {
  int d = 1;
  double beta = 1.0;
  double theta = 0.05;
  double alpha = 0.0;
  // Amplitude eps of the perturbation b(x) = eps * sin(x2) (componentwise).
  double b_amplitude = 0.0;
  std::optional<Mat> B;  // invertible d x d, identity when absent
};

// Granular-media particle model with grad_W(v, z) = theta (v - z1) and
// sigma(mu) = (sqrt 2 + sqrt(alpha/d) sin(mean of mu's first coordinate)) I.
BlockModel granular(const GranularParams& params);

// dX1 = (A X1 + B X2) dt, dX2 = (Zx X + z0) dt + sigma dW.
BlockModel linear_model(const Mat& A, const Mat& B, const Mat& Zx, const Vec& z0,
                        const Mat& sigma, std::string name = "linear");

// Same model with a constant shift added to the second-block drift.
BlockModel with_drift_shift(const BlockModel& model, const Vec& shift);

// ---- closed-form constants and structural conditions -------------------------

// Smallest k with rank[B, AB, ..., A^k B] = d1. Throws NotControllable.
int kalman_index(const Mat& A, const Mat& B, double rel_tol = 1e-10);

// 2(beta - theta1 - theta2) / (2 + 2 beta + beta^2 + sqrt(beta^4 + 4)).
double kappa(double beta, double theta1, double theta2);

struct TwistedConstants {
  double a;
  double r;
};
TwistedConstants twisted_constants(double beta);

struct GranularThetas {
  double theta1;
  double theta2;
};
GranularThetas granular_thetas(double theta, double alpha, double beta);

// Twisted distance sqrt(a^2|d1|^2 + |B d2|^2 + 2 r a <d1, B d2>).
double twisted_metric(const Vec& x, const Vec& y, double beta, const Mat& B);

// Matrix M with twisted_metric(x, y)^2 = (x-y)^T M (x-y).
Mat twisted_quadratic_form(double beta, const Mat& B);

struct ProbePlan {
  int n_states = 10000;
  int n_directions = 100;
  double box = 5.0;  // states uniform in [-box, box]^(d1+d2)
  double fd_step = 1e-5;
  std::uint64_t seed = 20240611;
};

struct DissipativityResult {
  bool pass = false;
  double worst_margin = 0.0;
  // Smallest delta for which the inequality holds on every probe.
  double delta_min = 0.0;
  Vec witness_x;
  Vec witness_v;
};

// Probes <(grad_2 b(x)) B^T v, v> + delta |B^T v|^2 >= 0.
DissipativityResult check_dissipativity(const BlockModel& model, double delta,
                                        const ProbePlan& plan = {});

// Max of |grad_W(v,z) - grad_W(v',z')| / (|v-v'| + |z-z'|) over random pairs.
double audit_kernel_lipschitz(const MeanFieldSpec& spec, int d1, int dim, const ProbePlan& plan);

struct ConditionReport {
  std::optional<int> kalman_index;
  std::optional<double> dissipativity_delta;  // empty means violated
  double dissipativity_worst_margin = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  std::optional<double> kappa;
  std::optional<double> twisted_a;
  std::optional<double> twisted_r;
  std::optional<double> theta_audit;
};

ConditionReport condition_report(const BlockModel& model, double delta, const ProbePlan& plan);

}  // namespace kel
