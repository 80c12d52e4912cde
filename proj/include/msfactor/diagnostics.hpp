#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "msfactor/partition.hpp"
#include "msfactor/sampler.hpp"

namespace msf {

struct PosteriorSummary {
  int draws_used = 0;
  int draws_rank_deficient = 0;  // skipped for q_mean
  Eigen::MatrixXd w_prob;        // n x k, Pr(w_ij = 1) under canonical labels
  Eigen::MatrixXd q_mean;        // n x k sign-aligned average of Q
  Eigen::MatrixXd q_hat;         // whitened q_mean (orthonormal)
  Eigen::MatrixXd d_mean;        // S x k
  std::vector<Eigen::MatrixXd> factors;  // mean(d_j) q_j q_j^T on the log-odds scale
  std::map<std::string, double> ess;
};

inline constexpr double kDefaultBurnIn = 0.5;

// Canonicalizes and averages the draws after dropping the first burn_in fraction.
PosteriorSummary summarize(std::span<const Draw> draws, double burn_in = kDefaultBurnIn);
inline PosteriorSummary summarize(const SampleLog& log, double burn_in = kDefaultBurnIn) {
  return summarize(std::span<const Draw>(log.draws), burn_in);
}

// Batch-means effective sample size with floor(sqrt(T)) batches; 0 for a
// constant series. Needs T >= 100.
double ess_batch_means(std::span<const double> series);

// ||P_hat - P_0||_F / ||P_0||_F for the column-space projectors.
double subspace_error(const Eigen::MatrixXd& q_hat, const Eigen::MatrixXd& q0);

// 1 - partition_distance between thresholded w_prob column j and the truth's level-j split.
double partition_recovery(const PosteriorSummary& summary, const RecursivePartition& truth, int level);

// Number of 0/1 changes along a node's canonical hard-assignment trace for column j.
int state_switches(std::span<const Draw> draws, int node, int column);

void to_json(nlohmann::json& j, const PosteriorSummary& summary);

}  // namespace msf
