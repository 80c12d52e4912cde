#include "msfactor/partition.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "msfactor/errors.hpp"

namespace msf {

RecursivePartition::RecursivePartition(int n, std::vector<BiPartition> levels)
    : n_(n), levels_(std::move(levels)) {
  if (n_ < 1) throw DimensionError("partition needs at least one node");
  side_of_.reserve(levels_.size());
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    BiPartition& bp = levels_[j];
    bp.level = static_cast<int>(j) + 1;
    std::sort(bp.side1.begin(), bp.side1.end());
    std::sort(bp.side2.begin(), bp.side2.end());
    std::vector<int> side(n_, -1);
    auto mark = [&](const NodeSet& nodes, int s) {
      for (int i : nodes) {
        if (i < 0 || i >= n_) throw RangeError("node index out of range in level " + std::to_string(j + 1));
        if (side[i] != -1) throw DomainError("node " + std::to_string(i) + " on both sides of level " + std::to_string(j + 1));
        side[i] = s;
      }
    };
    mark(bp.side1, 0);
    mark(bp.side2, 1);
    if (std::find(side.begin(), side.end(), -1) != side.end()) {
      throw DomainError("level " + std::to_string(j + 1) + " does not cover every node");
    }
    side_of_.push_back(std::move(side));
  }
}

RecursivePartition RecursivePartition::from_indicator(const Eigen::MatrixXd& w) {
  std::vector<BiPartition> levels(w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      (w(i, j) > 0.5 ? levels[j].side1 : levels[j].side2).push_back(static_cast<int>(i));
    }
  }
  return RecursivePartition(static_cast<int>(w.rows()), std::move(levels));
}

const BiPartition& RecursivePartition::level(int j) const {
  if (j < 1 || j > k()) throw RangeError("level " + std::to_string(j) + " outside [1, " + std::to_string(k()) + "]");
  return levels_[j - 1];
}

std::map<std::string, NodeSet> RecursivePartition::cells_at_level(int j) const {
  level(j);
  std::map<std::string, NodeSet> cells;
  for (int i = 0; i < n_; ++i) {
    std::string label(j, '0');
    for (int l = 0; l < j; ++l) label[l] = static_cast<char>('0' + side_of_[l][i]);
    cells[label].push_back(i);
  }
  return cells;
}

std::vector<int> RecursivePartition::side_labels(int j) const {
  level(j);
  return side_of_[j - 1];
}

Eigen::MatrixXd RecursivePartition::indicator() const {
  Eigen::MatrixXd w(n_, k());
  for (int j = 0; j < k(); ++j) {
    for (int i = 0; i < n_; ++i) w(i, j) = side_of_[j][i] == 0 ? 1.0 : 0.0;
  }
  return w;
}

bool operator==(const RecursivePartition& lhs, const RecursivePartition& rhs) {
  return lhs.n_ == rhs.n_ && lhs.side_of_ == rhs.side_of_;
}

RecursivePartition random_partition(int n, int k, Rng& rng) {
  if (k < 1) throw DimensionError("random_partition needs k >= 1");
  if (n < k) throw DimensionError("random_partition needs n >= k (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  std::vector<BiPartition> levels(k);
  for (auto& bp : levels) {
    do {
      bp.side1.clear();
      bp.side2.clear();
      for (int i = 0; i < n; ++i) (bernoulli(rng, 0.5) ? bp.side1 : bp.side2).push_back(i);
    } while (bp.side1.empty() || bp.side2.empty());
  }
  return RecursivePartition(n, std::move(levels));
}

namespace {

// Minimum-cost assignment on a square cost matrix (shortest augmenting paths).
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const int m = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (int row = 1; row <= m; ++row) {
    match[0] = row;
    int col0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const int row0 = match[col0];
      double delta = inf;
      int col1 = 0;
      for (int col = 1; col <= m; ++col) {
        if (used[col]) continue;
        const double cur = cost[row0 - 1][col - 1] - u[row0] - v[col];
        if (cur < minv[col]) {
          minv[col] = cur;
          way[col] = col0;
        }
        if (minv[col] < delta) {
          delta = minv[col];
          col1 = col;
        }
      }
      for (int col = 0; col <= m; ++col) {
        if (used[col]) {
          u[match[col]] += delta;
          v[col] -= delta;
        } else {
          minv[col] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> row_to_col(m);
  for (int col = 1; col <= m; ++col) row_to_col[match[col] - 1] = col - 1;
  return row_to_col;
}

std::vector<int> densify(std::span<const int> labels, int& count) {
  std::map<int, int> ids;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(labels[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  count = static_cast<int>(ids.size());
  return out;
}

}  // namespace

double partition_distance(std::span<const int> p, std::span<const int> q) {
  if (p.size() != q.size()) throw DimensionError("partition_distance: label vectors differ in length");
  if (p.empty()) return 0.0;
  int np = 0, nq = 0;
  const auto dp = densify(p, np);
  const auto dq = densify(q, nq);
  const int m = std::max(np, nq);
  std::vector<std::vector<double>> cost(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < dp.size(); ++i) cost[dp[i]][dq[i]] -= 1.0;
  const auto assignment = solve_assignment(cost);
  double agree = 0.0;
  for (int r = 0; r < m; ++r) agree -= cost[r][assignment[r]];
  return 1.0 - agree / static_cast<double>(p.size());
}

void to_json(nlohmann::json& j, const RecursivePartition& rp) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& bp : rp.levels()) levels.push_back({bp.side1, bp.side2});
  j = {{"n", rp.n()}, {"k", rp.k()}, {"levels", levels}};
}

void from_json(const nlohmann::json& j, RecursivePartition& rp) {
  std::vector<BiPartition> levels;
  for (const auto& lv : j.at("levels")) {
    if (!lv.is_array() || lv.size() != 2) throw ValidationError("partition level must be [side1, side2]");
    levels.push_back({0, lv[0].get<NodeSet>(), lv[1].get<NodeSet>()});
  }
  rp = RecursivePartition(j.at("n").get<int>(), std::move(levels));
}

}  // namespace msf
