#include "msfactor/whitening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "msfactor/errors.hpp"

namespace msf {

Eigen::MatrixXd cholesky(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols()) throw DimensionError("cholesky: matrix is not square");
  const Eigen::Index k = s.rows();
  if (k == 0) return Eigen::MatrixXd(0, 0);
  const double scale = s.cwiseAbs().maxCoeff();
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DomainError("cholesky: matrix is not symmetric");
  }
  const double threshold = kPivotTolerance * s.diagonal().maxCoeff();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double pivot = s(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > threshold)) {
      throw NotPositiveDefiniteError("cholesky: pivot " + std::to_string(j) + " not positive", static_cast<long>(j));
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Eigen::Index r = j + 1; r < k; ++r) {
      l(r, j) = (s(r, j) - l.row(r).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

Whitening whiten_with_factor(const Eigen::MatrixXd& x) {
  if (x.rows() < x.cols()) throw DimensionError("whiten: needs n >= k");
  Whitening out;
  out.l = cholesky(x.transpose() * x);
  // Q L^T = X
  out.q = out.l.triangularView<Eigen::Lower>().solve(x.transpose()).transpose();
  return out;
}

Eigen::MatrixXd whiten_backward(const Eigen::MatrixXd& x, const Whitening& wt, const Eigen::MatrixXd& grad_q) {
  const auto lower = wt.l.triangularView<Eigen::Lower>();
  // Q = X L^{-T}: direct term G L^{-1}
  const Eigen::MatrixXd g_linv = lower.transpose().solve(grad_q.transpose()).transpose();
  // adjoint of L, lower part only
  Eigen::MatrixXd l_bar = -lower.transpose().solve(grad_q.transpose() * wt.q);
  l_bar = l_bar.triangularView<Eigen::Lower>();
  // Cholesky adjoint: M_bar = sym(L^{-T} Phi(L^T L_bar) L^{-1})
  Eigen::MatrixXd phi = wt.l.transpose() * l_bar;
  phi = phi.triangularView<Eigen::Lower>();
  phi.diagonal() *= 0.5;
  Eigen::MatrixXd m_bar = lower.transpose().solve(phi);
  m_bar = lower.transpose().solve(m_bar.transpose()).transpose();
  m_bar = 0.5 * (m_bar + m_bar.transpose()).eval();
  return g_linv + 2.0 * x * m_bar;
}

bool rank_ok(const Eigen::MatrixXd& x) {
  if (x.rows() < x.cols()) throw DimensionError("rank_ok: needs n >= k");
  try {
    cholesky(x.transpose() * x);
    return true;
  } catch (const NotPositiveDefiniteError&) {
    return false;
  }
}

double orthonormality_error(const Eigen::MatrixXd& q) {
  if (q.cols() == 0) return 0.0;
  return (q.transpose() * q - Eigen::MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

std::vector<int> extract_column_partition(const Eigen::VectorXd& column, double tol) {
  const auto n = static_cast<std::size_t>(column.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) { return column[lhs] < column[rhs]; });
  std::vector<int> group(n, 0);
  int current = 0;
  for (std::size_t r = 1; r < n; ++r) {
    if (column[order[r]] - column[order[r - 1]] > tol) ++current;
    group[order[r]] = current;
  }
  std::vector<int> relabel(static_cast<std::size_t>(current) + 1, -1);
  std::vector<int> labels(n);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    int& id = relabel[group[i]];
    if (id < 0) id = next++;
    labels[i] = id;
  }
  return labels;
}

}  // namespace msf
