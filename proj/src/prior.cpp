#include "msfactor/prior.hpp"

#include <cmath>

#include "msfactor/errors.hpp"
#include "msfactor/whitening.hpp"

namespace msf {

Eigen::MatrixXd build_x(const Eigen::MatrixXd& w, const ColumnValues& values) {
  if (values.a.size() != w.cols() || values.b.size() != w.cols()) {
    throw DimensionError("build_x: column values do not match W");
  }
  Eigen::MatrixXd x(w.rows(), w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    x.col(j) = values.a[j] * w.col(j).array() + values.b[j] * (1.0 - w.col(j).array());
  }
  return x;
}

PriorDraw sample_prior(int n, int k, Rng& rng, int max_attempts) {
  if (k < 1 || n < k) throw DimensionError("sample_prior: needs n >= k >= 1");
  PriorDraw draw;
  draw.values.a.resize(k);
  draw.values.b.resize(k);
  draw.probs.p.resize(k);
  for (int j = 0; j < k; ++j) {
    draw.values.a[j] = standard_normal(rng);
    draw.values.b[j] = standard_normal(rng);
    draw.probs.p[j] = uniform01(rng);
  }
  Eigen::MatrixXd w(n, k);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < n; ++i) w(i, j) = bernoulli(rng, draw.probs.p[j]) ? 1.0 : 0.0;
    }
    if (rank_ok(build_x(w, draw.values))) {
      draw.structured = {w, draw.values};
      draw.attempts = attempt;
      return draw;
    }
  }
  throw PriorRejectionError("sample_prior: no full-rank W after " + std::to_string(max_attempts) + " attempts");
}

double log_g(const Eigen::MatrixXd& w, const MixtureProbs& probs) {
  if (probs.p.size() != w.cols()) throw DimensionError("log_g: probabilities do not match W");
  double total = 0.0;
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    const double p = probs.p[j];
    if (!(p > 0.0 && p < 1.0)) throw DomainError("log_g: p_" + std::to_string(j + 1) + " outside (0,1)");
    const double ones = w.col(j).sum();
    total += ones * std::log(p) + (static_cast<double>(w.rows()) - ones) * std::log1p(-p);
  }
  return total;
}

double log_gaussian_ab(const ColumnValues& values) {
  return -0.5 * (values.a.squaredNorm() + values.b.squaredNorm());
}

double log_det_m_term(const Eigen::MatrixXd& x) {
  return log_det_m_term(cholesky(x.transpose() * x), x.rows());
}

double log_det_m_term(const Eigen::MatrixXd& chol_factor, Eigen::Index n) {
  const auto k = chol_factor.rows();
  const double exponent = static_cast<double>(n - k - 1);
  if (exponent == 0.0) return 0.0;
  return exponent * chol_factor.diagonal().array().log().sum();
}

}  // namespace msf
