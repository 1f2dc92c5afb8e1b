#include "kel/linalg.hpp"

#include <algorithm>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace kel {

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

Mat sym_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double lambda_min(const Mat& symmetric) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(symmetric), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double lambda_max(const Mat& symmetric) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(symmetric), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

int numerical_rank(const Mat& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const Vec& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double cut = rel_tol * sv(0);
  return static_cast<int>((sv.array() > cut).count());
}

Vec sample_mean(const RowMat& samples) {
  return samples.colwise().mean().transpose();
}

Mat sample_covariance(const RowMat& samples) {
  const Vec mu = sample_mean(samples);
  const Eigen::Index n = samples.rows();
  Mat centered = samples.rowwise() - mu.transpose();
  if (n < 2) return Mat::Zero(samples.cols(), samples.cols());
  return (centered.transpose() * centered) / static_cast<double>(n - 1);
}

}  // namespace kel
