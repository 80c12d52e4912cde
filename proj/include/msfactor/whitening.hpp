#pragma once

#include <vector>

#include <Eigen/Dense>

namespace msf {

inline constexpr double kPivotTolerance = 1e-12;
inline constexpr double kGroupingTolerance = 1e-8;

// Lower Cholesky factor of a symmetric positive definite matrix. A pivot at or
// below kPivotTolerance * max(diag(S)) throws NotPositiveDefiniteError; this is
// also the numerical rank test for X in rank_ok.
Eigen::MatrixXd cholesky(const Eigen::MatrixXd& s);

// Cholesky whitening X -> X L^{-T} with L L^T = X^T X. The factor is kept
// because the gradient of the map needs it.
struct Whitening {
  Eigen::MatrixXd q;  // n x k, orthonormal columns
  Eigen::MatrixXd l;  // k x k lower Cholesky factor of X^T X
};

Whitening whiten_with_factor(const Eigen::MatrixXd& x);

inline Eigen::MatrixXd whiten(const Eigen::MatrixXd& x) { return whiten_with_factor(x).q; }

// Pulls a gradient with respect to Q back to X through the whitening map.
Eigen::MatrixXd whiten_backward(const Eigen::MatrixXd& x, const Whitening& wt, const Eigen::MatrixXd& grad_q);

bool rank_ok(const Eigen::MatrixXd& x);

// max |Q^T Q - I|
double orthonormality_error(const Eigen::MatrixXd& q);

// Single-linkage grouping of sorted values; labels numbered by first occurrence.
std::vector<int> extract_column_partition(const Eigen::VectorXd& column, double tol = kGroupingTolerance);

}  // namespace msf
