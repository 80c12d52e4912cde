#pragma once

#include <Eigen/Dense>

#include "msfactor/random.hpp"

namespace msf {

// Per-column values: rows in side1 of level j take a_j, the rest b_j.
struct ColumnValues {
  Eigen::VectorXd a;
  Eigen::VectorXd b;

  Eigen::Index k() const noexcept { return a.size(); }
};

struct MixtureProbs {
  Eigen::VectorXd p;  // each strictly inside (0, 1)
};

// Binary (or relaxed) assignment W together with the column values it selects.
struct StructuredMatrix {
  Eigen::MatrixXd w;
  ColumnValues values;
};

// x_ij = w_ij a_j + (1 - w_ij) b_j
Eigen::MatrixXd build_x(const Eigen::MatrixXd& w, const ColumnValues& values);
inline Eigen::MatrixXd build_x(const StructuredMatrix& sm) { return build_x(sm.w, sm.values); }

struct PriorDraw {
  ColumnValues values;
  MixtureProbs probs;
  StructuredMatrix structured;
  int attempts = 0;  // W draws needed to reach full rank
};

inline constexpr int kDefaultPriorAttempts = 1000;

// a_j, b_j ~ N(0,1), p_j ~ U(0,1), w_ij ~ Bernoulli(p_j); W is redrawn (a, b, p
// held) until build_x has full column rank. Throws PriorRejectionError past
// max_attempts.
PriorDraw sample_prior(int n, int k, Rng& rng, int max_attempts = kDefaultPriorAttempts);

// sum_ij w_ij log p_j + (1 - w_ij) log(1 - p_j); W may be relaxed.
double log_g(const Eigen::MatrixXd& w, const MixtureProbs& probs);

// -sum_j (a_j^2 + b_j^2) / 2
double log_gaussian_ab(const ColumnValues& values);

// ((n - k - 1) / 2) log det(X^T X)
double log_det_m_term(const Eigen::MatrixXd& x);

// Same term from an existing Cholesky factor of X^T X.
double log_det_m_term(const Eigen::MatrixXd& chol_factor, Eigen::Index n);

}  // namespace msf
