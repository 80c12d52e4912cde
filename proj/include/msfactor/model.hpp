#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "msfactor/partition.hpp"
#include "msfactor/prior.hpp"
#include "msfactor/random.hpp"

namespace msf {

// S symmetric binary adjacency matrices with zero diagonal, all n x n.
class NetworkDataset {
 public:
  NetworkDataset() = default;
  // Validates symmetry, zero diagonal and 0/1 entries; throws ValidationError
  // naming the first offending entry.
  NetworkDataset(int n, std::vector<Eigen::MatrixXd> subjects);

  int n() const noexcept { return n_; }
  int subjects() const noexcept { return static_cast<int>(adjacency_.size()); }
  const Eigen::MatrixXd& adjacency(int s) const { return adjacency_.at(s); }

  // Fraction of present edges over all subjects' upper triangles.
  double edge_density() const;

 private:
  int n_ = 0;
  std::vector<Eigen::MatrixXd> adjacency_;
};

void to_json(nlohmann::json& j, const NetworkDataset& data);
void from_json(const nlohmann::json& j, NetworkDataset& data);

// Loadings are held on the log scale so d_sj = exp(log_d_sj) > 0.
struct SubjectParams {
  Eigen::MatrixXd log_d;  // S x k
  Eigen::VectorXd z;      // S

  int subjects() const noexcept { return static_cast<int>(z.size()); }
};

inline constexpr double kLoadingShape = 0.1;
inline constexpr double kLoadingScale = 0.1;
inline constexpr double kOffsetSd = 10.0;

// sum_s sum_{i<j} A_sij psi_sij - log(1 + exp(psi_sij)),  psi_s = Q D_s Q^T + z_s
double log_likelihood(const NetworkDataset& data, const Eigen::MatrixXd& q, const SubjectParams& params);

// Inverse-Gamma(0.1, 0.1) on each d_sj with the log-scale Jacobian, N(0, 10^2) on z_s.
double log_prior_theta(const SubjectParams& params);

struct ThetaGradient {
  Eigen::MatrixXd log_d;
  Eigen::VectorXd z;
};

struct LikelihoodGradient {
  Eigen::MatrixXd q;
  Eigen::MatrixXd log_d;
  Eigen::VectorXd z;
};

LikelihoodGradient grad_psi_contract(const NetworkDataset& data, const Eigen::MatrixXd& q,
                                     const SubjectParams& params);

ThetaGradient grad_log_prior_theta(const SubjectParams& params);

struct SyntheticTruth {
  RecursivePartition partition;
  ColumnValues values;
  MixtureProbs probs;
  Eigen::MatrixXd q0;
  SubjectParams params;
};

struct SimulatedData {
  NetworkDataset data;
  SyntheticTruth truth;
};

// Whitens the structured matrix of `partition` and draws each upper-triangle
// edge from Bernoulli(sigmoid(psi)).
SimulatedData simulate_dataset(const RecursivePartition& partition, const ColumnValues& values,
                               const MixtureProbs& probs, const SubjectParams& params, Rng& rng);

void to_json(nlohmann::json& j, const SyntheticTruth& truth);
void from_json(const nlohmann::json& j, SyntheticTruth& truth);

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace msf
