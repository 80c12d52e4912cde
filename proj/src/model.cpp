#include "msfactor/model.hpp"

#include <cmath>
#include <string>

#include "msfactor/errors.hpp"
#include "msfactor/json_eigen.hpp"
#include "msfactor/whitening.hpp"

namespace msf {

NetworkDataset::NetworkDataset(int n, std::vector<Eigen::MatrixXd> subjects)
    : n_(n), adjacency_(std::move(subjects)) {
  if (n_ < 1) throw ValidationError("dataset: n must be positive");
  for (std::size_t s = 0; s < adjacency_.size(); ++s) {
    const auto& a = adjacency_[s];
    const std::string where = "subject " + std::to_string(s);
    if (a.rows() != n_ || a.cols() != n_) throw ValidationError(where + ": matrix is not " + std::to_string(n_) + "x" + std::to_string(n_));
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        const double v = a(i, j);
        const std::string entry = where + " entry (" + std::to_string(i) + "," + std::to_string(j) + ")";
        if (v != 0.0 && v != 1.0) throw ValidationError(entry + ": not binary");
        if (i == j && v != 0.0) throw ValidationError(entry + ": nonzero diagonal");
        if (v != a(j, i)) throw ValidationError(entry + ": asymmetric");
      }
    }
  }
}

double NetworkDataset::edge_density() const {
  if (adjacency_.empty() || n_ < 2) return 0.0;
  double edges = 0.0;
  for (const auto& a : adjacency_) edges += a.sum() / 2.0;
  return edges / (static_cast<double>(adjacency_.size()) * n_ * (n_ - 1) / 2.0);
}

void to_json(nlohmann::json& j, const NetworkDataset& data) {
  nlohmann::json subjects = nlohmann::json::array();
  for (int s = 0; s < data.subjects(); ++s) {
    const auto& a = data.adjacency(s);
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < data.n(); ++i) {
      std::vector<int> row(data.n());
      for (int c = 0; c < data.n(); ++c) row[c] = static_cast<int>(a(i, c));
      rows.push_back(std::move(row));
    }
    subjects.push_back(std::move(rows));
  }
  j = {{"n", data.n()}, {"subjects", std::move(subjects)}};
}

void from_json(const nlohmann::json& j, NetworkDataset& data) {
  if (!j.contains("n") || !j.contains("subjects")) throw ValidationError("dataset: needs \"n\" and \"subjects\"");
  const int n = j.at("n").get<int>();
  std::vector<Eigen::MatrixXd> subjects;
  for (std::size_t s = 0; s < j.at("subjects").size(); ++s) {
    const auto& rows = j.at("subjects")[s];
    if (!rows.is_array() || rows.size() != static_cast<std::size_t>(n)) {
      throw ValidationError("subject " + std::to_string(s) + ": expected " + std::to_string(n) + " rows");
    }
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
      if (!rows[i].is_array() || rows[i].size() != static_cast<std::size_t>(n)) {
        throw ValidationError("subject " + std::to_string(s) + " row " + std::to_string(i) + ": expected " + std::to_string(n) + " entries");
      }
      for (int c = 0; c < n; ++c) a(i, c) = rows[i][c].get<double>();
    }
    subjects.push_back(std::move(a));
  }
  data = NetworkDataset(n, std::move(subjects));
}

namespace {

void check_dims(const NetworkDataset& data, const Eigen::MatrixXd& q, const SubjectParams& params) {
  if (q.rows() != data.n()) throw DimensionError("Q rows do not match node count");
  if (params.subjects() != data.subjects() || params.log_d.rows() != data.subjects()) {
    throw DimensionError("subject parameters do not match dataset");
  }
  if (params.log_d.cols() != q.cols()) throw DimensionError("loadings do not match Q columns");
}

Eigen::MatrixXd linear_predictor(const Eigen::MatrixXd& q, const SubjectParams& params, int s) {
  const Eigen::VectorXd d = params.log_d.row(s).array().exp();
  Eigen::MatrixXd psi = (q * d.asDiagonal()) * q.transpose();
  psi.array() += params.z[s];
  return psi;
}

}  // namespace

double log_likelihood(const NetworkDataset& data, const Eigen::MatrixXd& q, const SubjectParams& params) {
  check_dims(data, q, params);
  const int n = data.n();
  double total = 0.0;
  for (int s = 0; s < data.subjects(); ++s) {
    const Eigen::MatrixXd psi = linear_predictor(q, params, s);
    const auto& a = data.adjacency(s);
    for (int c = 1; c < n; ++c) {
      for (int r = 0; r < c; ++r) total += a(r, c) * psi(r, c) - softplus(psi(r, c));
    }
  }
  return total;
}

double log_prior_theta(const SubjectParams& params) {
  const double alpha = kLoadingShape, beta = kLoadingScale;
  const double norm = alpha * std::log(beta) - std::lgamma(alpha);
  double total = 0.0;
  for (Eigen::Index s = 0; s < params.log_d.rows(); ++s) {
    for (Eigen::Index j = 0; j < params.log_d.cols(); ++j) {
      const double u = params.log_d(s, j);
      // log IG(e^u) + u
      total += norm - alpha * u - beta * std::exp(-u);
    }
  }
  total -= 0.5 * params.z.squaredNorm() / (kOffsetSd * kOffsetSd);
  return total;
}

ThetaGradient grad_log_prior_theta(const SubjectParams& params) {
  ThetaGradient g;
  g.log_d = (kLoadingScale * (-params.log_d.array()).exp() - kLoadingShape).matrix();
  g.z = -params.z / (kOffsetSd * kOffsetSd);
  return g;
}

LikelihoodGradient grad_psi_contract(const NetworkDataset& data, const Eigen::MatrixXd& q,
                                     const SubjectParams& params) {
  check_dims(data, q, params);
  const int n = data.n();
  const auto k = q.cols();
  LikelihoodGradient g{Eigen::MatrixXd::Zero(n, k), Eigen::MatrixXd::Zero(data.subjects(), k),
                       Eigen::VectorXd::Zero(data.subjects())};
  Eigen::MatrixXd resid(n, n);
  for (int s = 0; s < data.subjects(); ++s) {
    const Eigen::MatrixXd psi = linear_predictor(q, params, s);
    const auto& a = data.adjacency(s);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < n; ++r) resid(r, c) = r == c ? 0.0 : a(r, c) - sigmoid(psi(r, c));
    }
    const Eigen::VectorXd d = params.log_d.row(s).array().exp();
    const Eigen::MatrixXd rq = resid * q;
    g.q.noalias() += rq * d.asDiagonal();
    g.log_d.row(s) = 0.5 * d.array() * (q.array() * rq.array()).colwise().sum().transpose();
    g.z[s] = 0.5 * resid.sum();
  }
  return g;
}

SimulatedData simulate_dataset(const RecursivePartition& partition, const ColumnValues& values,
                               const MixtureProbs& probs, const SubjectParams& params, Rng& rng) {
  if (values.k() != partition.k() || probs.p.size() != partition.k()) {
    throw DimensionError("simulate_dataset: truth dimensions disagree with partition");
  }
  if (params.log_d.cols() != partition.k()) throw DimensionError("simulate_dataset: loadings do not match k");
  const int n = partition.n();
  SimulatedData out;
  out.truth = {partition, values, probs, whiten(build_x(partition.indicator(), values)), params};
  std::vector<Eigen::MatrixXd> subjects;
  for (int s = 0; s < params.subjects(); ++s) {
    const Eigen::MatrixXd psi = linear_predictor(out.truth.q0, params, s);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int c = 1; c < n; ++c) {
      for (int r = 0; r < c; ++r) {
        a(r, c) = a(c, r) = bernoulli(rng, sigmoid(psi(r, c))) ? 1.0 : 0.0;
      }
    }
    subjects.push_back(std::move(a));
  }
  out.data = NetworkDataset(n, std::move(subjects));
  return out;
}

void to_json(nlohmann::json& j, const SyntheticTruth& truth) {
  j = {{"partition", truth.partition},
       {"a", truth.values.a},
       {"b", truth.values.b},
       {"p", truth.probs.p},
       {"q0", truth.q0},
       {"log_d", truth.params.log_d},
       {"z", truth.params.z}};
}

void from_json(const nlohmann::json& j, SyntheticTruth& truth) {
  truth.partition = j.at("partition").get<RecursivePartition>();
  truth.values = {j.at("a").get<Eigen::VectorXd>(), j.at("b").get<Eigen::VectorXd>()};
  truth.probs = {j.at("p").get<Eigen::VectorXd>()};
  truth.q0 = j.at("q0").get<Eigen::MatrixXd>();
  truth.params = {j.at("log_d").get<Eigen::MatrixXd>(), j.at("z").get<Eigen::VectorXd>()};
}

}  // namespace msf
