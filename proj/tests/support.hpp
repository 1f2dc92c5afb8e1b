#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "kel/linalg.hpp"
#include "kel/rng.hpp"

namespace kel::test {

inline RowMat normal_cloud(Eigen::Index n, Eigen::Index d, std::uint64_t seed, std::uint64_t lane,
                           const Vec& shift) {
  RowMat x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    CounterRng rng(seed, StreamTag::Test, lane + static_cast<std::uint64_t>(i));
    for (Eigen::Index c = 0; c < d; ++c) x(i, c) = rng.normal() + shift(c);
  }
  return x;
}

inline RowMat normal_cloud(Eigen::Index n, Eigen::Index d, std::uint64_t seed, std::uint64_t lane) {
  return normal_cloud(n, d, seed, lane, Vec::Zero(d));
}

// Minimum mean squared matching cost over all permutations.
inline double brute_force_w2_sq(const RowMat& x, const RowMat& y) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(x.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) s += (x.row(i) - y.row(perm[i])).squaredNorm();
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(x.rows());
}

inline std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1)));
  return g;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
  return g;
}

inline Mat expm(const Mat& m) { return m.exp(); }

// Sigma(t) = int_0^t e^{Fs} G G^T e^{F^T s} ds via the Van Loan block exponential.
inline Mat van_loan_covariance(const Mat& F, const Mat& G, double t) {
  const Eigen::Index n = F.rows();
  Mat m = Mat::Zero(2 * n, 2 * n);
  m.topLeftCorner(n, n) = -F;
  m.topRightCorner(n, n) = G * G.transpose();
  m.bottomRightCorner(n, n) = F.transpose();
  const Mat e = expm(m * t);
  const Mat phi = e.bottomRightCorner(n, n).transpose();
  return phi * e.topRightCorner(n, n);
}

}  // namespace kel::test
