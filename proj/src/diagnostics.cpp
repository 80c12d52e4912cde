#include "msfactor/diagnostics.hpp"

#include <cmath>

#include "msfactor/errors.hpp"
#include "msfactor/json_eigen.hpp"
#include "msfactor/whitening.hpp"

namespace msf {

PosteriorSummary summarize(std::span<const Draw> draws, double burn_in) {
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw DomainError("burn_in must lie in [0, 1)");
  const auto skip = static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(draws.size())));
  if (draws.size() <= skip) throw EmptyInputError("summarize: no draws after burn-in");
  const auto kept = draws.subspan(skip);

  const Draw& first = kept.front();
  const auto n = first.w.rows(), k = first.w.cols(), subjects = first.log_d.rows();
  PosteriorSummary out;
  out.w_prob = Eigen::MatrixXd::Zero(n, k);
  out.q_mean = Eigen::MatrixXd::Zero(n, k);
  out.d_mean = Eigen::MatrixXd::Zero(subjects, k);

  Eigen::MatrixXd reference;
  int q_count = 0;
  std::vector<double> potential;
  std::vector<std::vector<double>> p_cols(k);
  for (const Draw& raw : kept) {
    const Draw d = canonicalize(raw);
    const Eigen::MatrixXd w = d.w.cast<double>();
    out.w_prob += w;
    out.d_mean += d.log_d.array().exp().matrix();
    potential.push_back(d.potential);
    for (Eigen::Index j = 0; j < k; ++j) p_cols[j].push_back(d.probs.p[j]);
    const Eigen::MatrixXd x = build_x(w, d.values);
    if (!rank_ok(x)) {
      ++out.draws_rank_deficient;
      continue;
    }
    Eigen::MatrixXd q = whiten(x);
    if (reference.size() == 0) {
      reference = q;
    } else {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (q.col(j).dot(reference.col(j)) < 0.0) q.col(j) *= -1.0;
      }
    }
    out.q_mean += q;
    ++q_count;
  }
  const double count = static_cast<double>(kept.size());
  out.draws_used = static_cast<int>(kept.size());
  out.w_prob /= count;
  out.d_mean /= count;
  if (q_count > 0) {
    out.q_mean /= q_count;
    if (rank_ok(out.q_mean)) out.q_hat = whiten(out.q_mean);
  }
  const Eigen::MatrixXd& q_for_factors = out.q_hat.size() ? out.q_hat : out.q_mean;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double loading = subjects > 0 ? out.d_mean.col(j).mean() : 0.0;
    out.factors.push_back(loading * q_for_factors.col(j) * q_for_factors.col(j).transpose());
  }
  if (kept.size() >= 100) {
    out.ess["U"] = ess_batch_means(potential);
    for (Eigen::Index j = 0; j < k; ++j) out.ess["p_" + std::to_string(j + 1)] = ess_batch_means(p_cols[j]);
  }
  return out;
}

double ess_batch_means(std::span<const double> series) {
  const auto total = series.size();
  if (total < 100) throw LengthError("ess_batch_means: series needs at least 100 values");
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(total))));
  const std::size_t batch_size = total / batches;
  const std::size_t used = batches * batch_size;
  const auto tail = series.subspan(total - used);

  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(total);
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= static_cast<double>(total - 1);
  if (var <= 0.0) return 0.0;

  double tail_mean = 0.0;
  for (double v : tail) tail_mean += v;
  tail_mean /= static_cast<double>(used);
  double batch_var = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    double m = 0.0;
    for (std::size_t i = 0; i < batch_size; ++i) m += tail[b * batch_size + i];
    m /= static_cast<double>(batch_size);
    batch_var += (m - tail_mean) * (m - tail_mean);
  }
  batch_var = static_cast<double>(batch_size) * batch_var / static_cast<double>(batches - 1);
  if (batch_var <= 0.0) return static_cast<double>(total);
  return std::min(static_cast<double>(total), static_cast<double>(total) * var / batch_var);
}

double subspace_error(const Eigen::MatrixXd& q_hat, const Eigen::MatrixXd& q0) {
  if (q_hat.rows() != q0.rows()) throw DimensionError("subspace_error: row counts differ");
  if (orthonormality_error(q_hat) > 1e-6 || orthonormality_error(q0) > 1e-6) {
    throw DomainError("subspace_error: inputs must have orthonormal columns");
  }
  const Eigen::MatrixXd p0 = q0 * q0.transpose();
  return (q_hat * q_hat.transpose() - p0).norm() / p0.norm();
}

double partition_recovery(const PosteriorSummary& summary, const RecursivePartition& truth, int level) {
  const auto truth_labels = truth.side_labels(level);
  if (summary.w_prob.rows() != truth.n() || level > summary.w_prob.cols()) {
    throw DimensionError("partition_recovery: summary does not match truth");
  }
  std::vector<int> estimate(truth.n());
  for (int i = 0; i < truth.n(); ++i) estimate[i] = summary.w_prob(i, level - 1) > 0.5 ? 0 : 1;
  return 1.0 - partition_distance(estimate, truth_labels);
}

int state_switches(std::span<const Draw> draws, int node, int column) {
  int switches = 0;
  int previous = -1;
  for (const Draw& raw : draws) {
    const int current = canonicalize(raw).w(node, column);
    if (previous >= 0 && current != previous) ++switches;
    previous = current;
  }
  return switches;
}

void to_json(nlohmann::json& j, const PosteriorSummary& summary) {
  j = {{"draws_used", summary.draws_used},
       {"draws_rank_deficient", summary.draws_rank_deficient},
       {"w_prob", summary.w_prob},
       {"q_mean", summary.q_mean},
       {"d_mean", summary.d_mean},
       {"ess", summary.ess}};
  if (summary.q_hat.size()) j["q_hat"] = summary.q_hat;
}

}  // namespace msf
