#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "msfactor/random.hpp"

namespace msf {

using NodeSet = std::vector<int>;  // sorted, 0-based node indices

// One two-way split of {0,...,n-1}.
struct BiPartition {
  int level = 0;  // 1-based
  NodeSet side1;
  NodeSet side2;
};

// Sequence of k bi-partitions. Level-j cells are intersections of the first j
// splits; no tree is stored.
class RecursivePartition {
 public:
  RecursivePartition() = default;
  RecursivePartition(int n, std::vector<BiPartition> levels);

  // From an n x k 0/1 matrix: entry 1 puts node i in side1 of level j+1.
  static RecursivePartition from_indicator(const Eigen::MatrixXd& w);

  int n() const noexcept { return n_; }
  int k() const noexcept { return static_cast<int>(levels_.size()); }
  const BiPartition& level(int j) const;
  const std::vector<BiPartition>& levels() const noexcept { return levels_; }

  // Non-empty cells at level j keyed by label bits "h1...hj", with '0' for side1.
  std::map<std::string, NodeSet> cells_at_level(int j) const;

  // 0 for side1, 1 for side2 at level j.
  std::vector<int> side_labels(int j) const;

  // n x k matrix, 1 where the node is in side1.
  Eigen::MatrixXd indicator() const;

  friend bool operator==(const RecursivePartition& lhs, const RecursivePartition& rhs);

 private:
  int n_ = 0;
  std::vector<BiPartition> levels_;
  std::vector<std::vector<int>> side_of_;  // side_of_[j-1][i] in {0,1}
};

// Fair coin per node and level, each level resampled until both sides are non-empty.
RecursivePartition random_partition(int n, int k, Rng& rng);

// 1 - (best agreement over label matchings) / n.
double partition_distance(std::span<const int> p, std::span<const int> q);

void to_json(nlohmann::json& j, const RecursivePartition& rp);
void from_json(const nlohmann::json& j, RecursivePartition& rp);

}  // namespace msf
