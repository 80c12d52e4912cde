#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "msfactor/model.hpp"
#include "msfactor/prior.hpp"
#include "msfactor/random.hpp"

namespace msf {

using BinaryMatrix = Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kDefaultTemperature = 0.2;

// Every unknown of the chain. HMC moves (log_d, z, beta); the exchange step
// moves (a, b, p).
struct ChainState {
  Eigen::MatrixXd beta;  // n x k relaxation logits
  SubjectParams params;
  ColumnValues values;
  MixtureProbs probs;
  double tau = kDefaultTemperature;

  int n() const noexcept { return static_cast<int>(beta.rows()); }
  int k() const noexcept { return static_cast<int>(beta.cols()); }

  // 1 / (1 + exp(-beta / tau))
  Eigen::MatrixXd relaxed_w() const;
  // 1 where the relaxed weight exceeds 1/2
  Eigen::MatrixXd hard_w() const;
};

struct PotentialOptions {
  bool include_likelihood = true;
  // Standard logistic reference density on each beta_ij. It does not depend on
  // (a, b, p), so the exchange step is unaffected; without it the target is
  // flat in beta once the sigmoid saturates.
  bool relaxation_base = true;
};

// Joint potential U and its gradient over the HMC coordinates.
class Posterior {
 public:
  explicit Posterior(const NetworkDataset& data, PotentialOptions options = {});

  struct Terms {
    double log_likelihood = 0.0;
    double log_prior_theta = 0.0;
    double log_g = 0.0;
    double log_det_m = 0.0;
    double log_gaussian_ab = 0.0;
    double log_base = 0.0;

    double potential() const {
      return -(log_likelihood + log_prior_theta + log_g + log_det_m + log_gaussian_ab + log_base);
    }
  };

  // Throws RankError when the relaxed X is rank deficient.
  Terms terms(const ChainState& state) const;
  double potential(const ChainState& state) const { return terms(state).potential(); }
  // Gradient of U packed as (log_d, z, beta), column-major blocks.
  Eigen::VectorXd gradient(const ChainState& state) const;
  // nullopt on rank failure.
  std::optional<double> evaluate(const ChainState& state, Eigen::VectorXd* grad) const;

  const NetworkDataset& data() const noexcept { return *data_; }
  const PotentialOptions& options() const noexcept { return options_; }

  static Eigen::Index dimension(const ChainState& state);
  static Eigen::VectorXd pack(const ChainState& state);
  static void unpack(const Eigen::VectorXd& position, ChainState& state);

 private:
  const NetworkDataset* data_;
  PotentialOptions options_;
};

double potential_u(const ChainState& state, const Posterior& posterior);
Eigen::VectorXd grad_u(const ChainState& state, const Posterior& posterior);

// Leapfrog for ds/dt = Omega v, dv/dt = -grad U. `eval(s, grad)` returns U(s)
// and fills grad, or nullopt when s is outside the support.
struct Trajectory {
  Eigen::VectorXd position;
  Eigen::VectorXd momentum;
  double potential = 0.0;
  Eigen::VectorXd gradient;
  bool valid = false;
};

template <class Eval>
Trajectory leapfrog(const Eigen::VectorXd& position, const Eigen::VectorXd& momentum, double h, int steps,
                    const Eigen::VectorXd& omega, Eval&& eval) {
  Trajectory out{position, momentum, 0.0, Eigen::VectorXd(position.size()), false};
  auto u = eval(out.position, out.gradient);
  if (!u) return out;
  out.momentum -= 0.5 * h * out.gradient;
  for (int step = 0; step < steps; ++step) {
    out.position += h * omega.cwiseProduct(out.momentum);
    u = eval(out.position, out.gradient);
    if (!u || !std::isfinite(*u)) return out;
    out.momentum -= (step + 1 == steps ? 0.5 : 1.0) * h * out.gradient;
  }
  out.potential = *u;
  out.valid = true;
  return out;
}

inline double kinetic_energy(const Eigen::VectorXd& momentum, const Eigen::VectorXd& omega) {
  return 0.5 * momentum.cwiseProduct(omega).dot(momentum);
}

// v ~ N(0, Omega^{-1})
inline Eigen::VectorXd draw_momentum(const Eigen::VectorXd& omega, Rng& rng) {
  Eigen::VectorXd v(omega.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = standard_normal(rng) / std::sqrt(omega[i]);
  return v;
}

struct HmcStep {
  bool accepted = false;
  bool valid = false;
  double accept_prob = 0.0;
};

// One Metropolis-corrected HMC transition on a generic target; `position` and
// `potential` are updated on acceptance.
template <class Eval>
HmcStep hmc_transition(Eigen::VectorXd& position, double& potential, double h, int steps, const Eigen::VectorXd& omega,
                       Eval&& eval, Rng& rng) {
  const Eigen::VectorXd v0 = draw_momentum(omega, rng);
  const Trajectory t = leapfrog(position, v0, h, steps, omega, eval);
  HmcStep step;
  step.valid = t.valid;
  if (t.valid) {
    const double log_ratio = -t.potential + potential - kinetic_energy(t.momentum, omega) + kinetic_energy(v0, omega);
    step.accept_prob = std::isfinite(log_ratio) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
    if (uniform01(rng) < step.accept_prob) {
      position = t.position;
      potential = t.potential;
      step.accepted = true;
    }
  }
  return step;
}

struct HmcConfig {
  double step_size = 0.05;
  int leapfrog_steps = 20;
  Eigen::VectorXd mass;  // diagonal Omega; empty means identity
  double target_accept = 0.7;
};

struct ExchangeConfig {
  Eigen::VectorXd radius;  // r_j; empty means default_radius for every column
  double default_radius = 0.25;
  int max_rejection_attempts = 1000;
  double target_accept = 0.35;
};

struct StateTrajectory {
  ChainState state;
  Eigen::VectorXd momentum;
  bool valid = false;
};

StateTrajectory leapfrog(const ChainState& state, const Eigen::VectorXd& momentum, double h, int steps,
                         const Eigen::VectorXd& omega, const Posterior& posterior);

// Step (i): HMC over (log_d, z, beta) with (a, b, p) held fixed.
HmcStep hmc_update(ChainState& state, const Posterior& posterior, const HmcConfig& config, Rng& rng);

struct ExchangeStep {
  std::vector<char> accepted;  // per column
  std::vector<char> skipped;   // auxiliary draw exhausted its attempts
  double acceptance() const;
  bool any() const;
};

// Step (ii): exchange-algorithm update of (a_j, b_j, p_j), one column at a time.
ExchangeStep exchange_update(ChainState& state, const Posterior& posterior, const ExchangeConfig& config, Rng& rng);

struct ChainConfig {
  int iterations = 1000;  // including warmup
  int warmup = 500;
  int thin = 1;
  bool anneal_tau = false;
  double tau_start = 0.5;
  std::vector<int> w_trace_nodes;  // empty means all nodes
};

struct Draw {
  int iteration = 0;
  double potential = 0.0;
  bool hmc_accept = false;
  double exch_accept = 0.0;
  double step_size = 0.0;
  ColumnValues values;
  MixtureProbs probs;
  Eigen::MatrixXd log_d;
  Eigen::VectorXd z;
  BinaryMatrix w;  // hard assignments, all nodes
};

struct SampleLog {
  ChainState init;
  std::vector<Draw> draws;
  double step_size = 0.0;
  Eigen::VectorXd mass;
  Eigen::VectorXd radius;
  double hmc_acceptance = 0.0;       // post-warmup
  double exchange_acceptance = 0.0;  // post-warmup, per column
  int exchange_skips = 0;
  int invalid_trajectories = 0;
};

// Valid starting point: random partition pattern, a = 1, b = -1, p = 1/2,
// log_d = 0, z = logit(edge density), beta at w = 0.05 / 0.95.
ChainState initialize_state(const NetworkDataset& data, int k, double tau, Rng& rng);

SampleLog run_chain(const Posterior& posterior, const ChainState& init, HmcConfig hmc, ExchangeConfig exchange,
                    const ChainConfig& config, Rng& rng);

// Orders each column so that a_j >= b_j, complementing W and p. Leaves Q unchanged.
Draw canonicalize(Draw draw);
ChainState canonicalize(ChainState state);

}  // namespace msf
