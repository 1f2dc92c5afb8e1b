#pragma once

#include <Eigen/Dense>

namespace kel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
// Sample arrays: one row per particle / sample.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat symmetrize(const Mat& m);

// Principal square root of a symmetric PSD matrix; eigenvalues below zero are
// clipped to zero.
Mat sym_sqrt(const Mat& m);

double lambda_min(const Mat& symmetric);
double lambda_max(const Mat& symmetric);

// Rank with singular values counted when above rel_tol * largest singular value.
int numerical_rank(const Mat& m, double rel_tol = 1e-10);


Mat sample_covariance(const RowMat& samples);
Vec sample_mean(const RowMat& samples);

}  // namespace kel
