#include "msfactor/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msfactor/errors.hpp"
#include "msfactor/whitening.hpp"

namespace msf {

Eigen::MatrixXd ChainState::relaxed_w() const {
  return beta.unaryExpr([t = tau](double x) { return sigmoid(x / t); });
}

Eigen::MatrixXd ChainState::hard_w() const {
  return relaxed_w().unaryExpr([](double w) { return w > 0.5 ? 1.0 : 0.0; });
}

Posterior::Posterior(const NetworkDataset& data, PotentialOptions options) : data_(&data), options_(options) {}

Eigen::Index Posterior::dimension(const ChainState& state) {
  return state.params.log_d.size() + state.params.z.size() + state.beta.size();
}

Eigen::VectorXd Posterior::pack(const ChainState& state) {
  Eigen::VectorXd s(dimension(state));
  const auto nd = state.params.log_d.size(), nz = state.params.z.size();
  s.head(nd) = state.params.log_d.reshaped();
  s.segment(nd, nz) = state.params.z;
  s.tail(state.beta.size()) = state.beta.reshaped();
  return s;
}

void Posterior::unpack(const Eigen::VectorXd& position, ChainState& state) {
  if (position.size() != dimension(state)) throw DimensionError("position length does not match state");
  const auto nd = state.params.log_d.size(), nz = state.params.z.size();
  state.params.log_d.reshaped() = position.head(nd);
  state.params.z = position.segment(nd, nz);
  state.beta.reshaped() = position.tail(state.beta.size());
}

namespace {

void check_state(const ChainState& state, const NetworkDataset& data) {
  if (state.n() != data.n()) throw DimensionError("state has " + std::to_string(state.n()) + " nodes, data has " + std::to_string(data.n()));
  if (state.values.k() != state.k() || state.values.b.size() != state.k() || state.probs.p.size() != state.k()) {
    throw DimensionError("column values do not match beta");
  }
  if (state.params.log_d.rows() != state.params.subjects() || state.params.log_d.cols() != state.k()) {
    throw DimensionError("loadings must be S x k");
  }
  if (!(state.tau > 0.0)) throw DomainError("temperature must be positive");
}

}  // namespace

std::optional<double> Posterior::evaluate(const ChainState& state, Eigen::VectorXd* grad) const {
  check_state(state, *data_);
  const int n = state.n(), k = state.k();
  const Eigen::MatrixXd w = state.relaxed_w();
  const Eigen::MatrixXd x = build_x(w, state.values);
  Whitening wt;
  try {
    wt = whiten_with_factor(x);
  } catch (const RankError&) {
    return std::nullopt;
  }

  const bool use_lik = options_.include_likelihood && data_->subjects() > 0;
  if (use_lik && state.params.subjects() != data_->subjects()) throw DimensionError("subject count mismatch");

  Terms t;
  if (use_lik) t.log_likelihood = log_likelihood(*data_, wt.q, state.params);
  t.log_prior_theta = log_prior_theta(state.params);
  t.log_g = log_g(w, state.probs);
  t.log_det_m = log_det_m_term(wt.l, n);
  t.log_gaussian_ab = log_gaussian_ab(state.values);
  if (options_.relaxation_base) {
    t.log_base = -state.beta.unaryExpr([](double b) { return softplus(b) + softplus(-b); }).sum();
  }
  const double u = t.potential();
  if (!std::isfinite(u)) return std::nullopt;
  if (grad == nullptr) return u;

  const Eigen::Index nd = state.params.log_d.size(), nz = state.params.z.size();
  grad->resize(dimension(state));
  const ThetaGradient prior_grad = grad_log_prior_theta(state.params);
  Eigen::MatrixXd grad_log_d = -prior_grad.log_d;
  Eigen::VectorXd grad_z = -prior_grad.z;

  Eigen::MatrixXd grad_x = Eigen::MatrixXd::Zero(n, k);
  if (use_lik) {
    const LikelihoodGradient lg = grad_psi_contract(*data_, wt.q, state.params);
    grad_log_d -= lg.log_d;
    grad_z -= lg.z;
    grad_x = whiten_backward(x, wt, -lg.q);
  }
  // d/dX of ((n-k-1)/2) log det M is (n-k-1) X M^{-1} = (n-k-1) Q L^{-1}
  const double exponent = static_cast<double>(n - k - 1);
  if (exponent != 0.0) {
    grad_x -= exponent * wt.l.triangularView<Eigen::Lower>().transpose().solve(wt.q.transpose()).transpose();
  }

  Eigen::MatrixXd grad_beta(n, k);
  for (int j = 0; j < k; ++j) {
    const double spread = state.values.a[j] - state.values.b[j];
    const double logit_p = std::log(state.probs.p[j]) - std::log1p(-state.probs.p[j]);
    for (int i = 0; i < n; ++i) {
      const double wij = w(i, j);
      const double grad_w = grad_x(i, j) * spread - logit_p;
      grad_beta(i, j) = grad_w * wij * (1.0 - wij) / state.tau;
      if (options_.relaxation_base) grad_beta(i, j) += std::tanh(0.5 * state.beta(i, j));
    }
  }
  grad->head(nd) = grad_log_d.reshaped();
  grad->segment(nd, nz) = grad_z;
  grad->tail(grad_beta.size()) = grad_beta.reshaped();
  return u;
}

Posterior::Terms Posterior::terms(const ChainState& state) const {
  check_state(state, *data_);
  const Eigen::MatrixXd w = state.relaxed_w();
  const Eigen::MatrixXd x = build_x(w, state.values);
  const Whitening wt = whiten_with_factor(x);
  Terms t;
  if (options_.include_likelihood && data_->subjects() > 0) t.log_likelihood = log_likelihood(*data_, wt.q, state.params);
  t.log_prior_theta = log_prior_theta(state.params);
  t.log_g = log_g(w, state.probs);
  t.log_det_m = log_det_m_term(wt.l, state.n());
  t.log_gaussian_ab = log_gaussian_ab(state.values);
  if (options_.relaxation_base) {
    t.log_base = -state.beta.unaryExpr([](double b) { return softplus(b) + softplus(-b); }).sum();
  }
  return t;
}

Eigen::VectorXd Posterior::gradient(const ChainState& state) const {
  Eigen::VectorXd g;
  if (!evaluate(state, &g)) throw RankError("gradient: relaxed X is rank deficient", -1);
  return g;
}

double potential_u(const ChainState& state, const Posterior& posterior) { return posterior.potential(state); }

Eigen::VectorXd grad_u(const ChainState& state, const Posterior& posterior) { return posterior.gradient(state); }

namespace {

auto state_evaluator(const ChainState& base, const Posterior& posterior) {
  return [&posterior, scratch = base](const Eigen::VectorXd& s, Eigen::VectorXd& g) mutable {
    Posterior::unpack(s, scratch);
    return posterior.evaluate(scratch, &g);
  };
}

Eigen::VectorXd resolve_mass(const Eigen::VectorXd& mass, Eigen::Index dim) {
  if (mass.size() == 0) return Eigen::VectorXd::Ones(dim);
  if (mass.size() != dim) throw DimensionError("mass vector length " + std::to_string(mass.size()) + " != " + std::to_string(dim));
  if ((mass.array() <= 0.0).any()) throw DomainError("mass entries must be positive");
  return mass;
}

}  // namespace

StateTrajectory leapfrog(const ChainState& state, const Eigen::VectorXd& momentum, double h, int steps,
                         const Eigen::VectorXd& omega, const Posterior& posterior) {
  const Eigen::VectorXd mass = resolve_mass(omega, Posterior::dimension(state));
  const Trajectory t = leapfrog(Posterior::pack(state), momentum, h, steps, mass, state_evaluator(state, posterior));
  StateTrajectory out{state, t.momentum, t.valid};
  Posterior::unpack(t.position, out.state);
  return out;
}

HmcStep hmc_update(ChainState& state, const Posterior& posterior, const HmcConfig& config, Rng& rng) {
  const Eigen::VectorXd mass = resolve_mass(config.mass, Posterior::dimension(state));
  Eigen::VectorXd position = Posterior::pack(state);
  const auto u0 = posterior.evaluate(state, nullptr);
  if (!u0) return {};
  double potential = *u0;
  const HmcStep step = hmc_transition(position, potential, config.step_size, config.leapfrog_steps, mass,
                                      state_evaluator(state, posterior), rng);
  if (step.accepted) Posterior::unpack(position, state);
  return step;
}

double ExchangeStep::acceptance() const {
  if (accepted.empty()) return 0.0;
  return static_cast<double>(std::count(accepted.begin(), accepted.end(), 1)) / static_cast<double>(accepted.size());
}

bool ExchangeStep::any() const { return std::find(accepted.begin(), accepted.end(), 1) != accepted.end(); }

ExchangeStep exchange_update(ChainState& state, const Posterior& posterior, const ExchangeConfig& config, Rng& rng) {
  const int n = state.n(), k = state.k();
  Eigen::VectorXd radius = config.radius.size() == 0 ? Eigen::VectorXd::Constant(k, config.default_radius) : config.radius;
  if (radius.size() != k) throw DimensionError("exchange radius length does not match k");

  ExchangeStep step{std::vector<char>(k, 0), std::vector<char>(k, 0)};
  auto current_u = posterior.evaluate(state, nullptr);
  if (!current_u) return step;
  // The assignment stays fixed across the sweep: beta is not touched here.
  const Eigen::MatrixXd w_hard = state.hard_w();
  Eigen::MatrixXd y(n, k);

  for (int j = 0; j < k; ++j) {
    const double ones = w_hard.col(j).sum();
    ChainState proposal = state;
    proposal.probs.p[j] = beta_draw(rng, 1.0 + ones, 1.0 + n - ones);
    proposal.values.a[j] += radius[j] * (2.0 * uniform01(rng) - 1.0);
    proposal.values.b[j] += radius[j] * (2.0 * uniform01(rng) - 1.0);
    const double p_new = proposal.probs.p[j];
    if (!(p_new > 0.0 && p_new < 1.0)) continue;

    // Auxiliary Y from the model at the proposed values, rank-conditioned by rejection.
    bool drawn = false;
    for (int attempt = 0; attempt < config.max_rejection_attempts && !drawn; ++attempt) {
      for (int c = 0; c < k; ++c) {
        for (int i = 0; i < n; ++i) y(i, c) = bernoulli(rng, proposal.probs.p[c]) ? 1.0 : 0.0;
      }
      drawn = rank_ok(build_x(y, proposal.values));
    }
    if (!drawn) {
      step.skipped[j] = 1;
      continue;
    }
    // f(Y | current) includes the rank indicator at the current values.
    if (!rank_ok(build_x(y, state.values))) continue;

    const auto proposed_u = posterior.evaluate(proposal, nullptr);
    if (!proposed_u) continue;

    // Normalising constants cancel: U ratio, Beta-proposal ratio g(W; p) / g(W; p*),
    // and the auxiliary ratio g(Y; p) / g(Y; p*).
    const double log_ratio = -*proposed_u + *current_u + log_g(w_hard, state.probs) - log_g(w_hard, proposal.probs) +
                             log_g(y, state.probs) - log_g(y, proposal.probs);
    if (std::log(uniform01(rng)) < log_ratio) {
      state = std::move(proposal);
      current_u = proposed_u;
      step.accepted[j] = 1;
    }
  }
  return step;
}

namespace {

// Step-size dual averaging toward a target acceptance rate.
class DualAveraging {
 public:
  DualAveraging(double step, double target) : target_(target) { restart(step); }

  void restart(double step) {
    mu_ = std::log(10.0 * step);
    log_step_ = std::log(step);
    log_step_avg_ = 0.0;
    h_bar_ = 0.0;
    count_ = 0;
  }

  double update(double accept_prob) {
    ++count_;
    const double t = count_;
    const double eta = 1.0 / (t + kT0);
    h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_prob);
    log_step_ = mu_ - std::sqrt(t) / kGamma * h_bar_;
    const double weight = std::pow(t, -kKappa);
    log_step_avg_ = weight * log_step_ + (1.0 - weight) * log_step_avg_;
    return std::exp(log_step_);
  }

  double final_step() const { return count_ == 0 ? std::exp(log_step_) : std::exp(log_step_avg_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double target_;
  double mu_ = 0.0, log_step_ = 0.0, log_step_avg_ = 0.0, h_bar_ = 0.0;
  int count_ = 0;
};

// Ends of the mass-adaptation windows: a fast initial buffer, doubling slow
// windows, and a fast terminal buffer.
std::vector<int> mass_window_ends(int warmup) {
  std::vector<int> ends;
  if (warmup < 100) return ends;
  const int start = static_cast<int>(0.15 * warmup);
  const int stop = warmup - static_cast<int>(0.1 * warmup);
  int size = 25;
  int end = start + size;
  while (end < stop) {
    const int next = end + 2 * size;
    if (next + 2 * size > stop) {
      ends.push_back(stop);
      break;
    }
    ends.push_back(end);
    size *= 2;
    end = next;
  }
  if (ends.empty()) ends.push_back(stop);
  return ends;
}

Draw record(const ChainState& state, int iteration, double potential, bool hmc_accept, double exch_accept, double h) {
  Draw d;
  d.iteration = iteration;
  d.potential = potential;
  d.hmc_accept = hmc_accept;
  d.exch_accept = exch_accept;
  d.step_size = h;
  d.values = state.values;
  d.probs = state.probs;
  d.log_d = state.params.log_d;
  d.z = state.params.z;
  d.w = state.hard_w().cast<unsigned char>();
  return d;
}

}  // namespace

ChainState initialize_state(const NetworkDataset& data, int k, double tau, Rng& rng) {
  const int n = data.n();
  if (k < 1 || n < k) throw InitializationError("initialize_state: needs n >= k >= 1");
  if (!(tau > 0.0)) throw InitializationError("initialize_state: temperature must be positive");
  ChainState state;
  state.tau = tau;
  state.values = {Eigen::VectorXd::Ones(k), -Eigen::VectorXd::Ones(k)};
  state.probs = {Eigen::VectorXd::Constant(k, 0.5)};
  const int subjects = data.subjects();
  const double density = std::clamp(data.edge_density(), 1e-3, 1.0 - 1e-3);
  state.params = {Eigen::MatrixXd::Zero(subjects, k),
                  Eigen::VectorXd::Constant(subjects, std::log(density) - std::log1p(-density))};
  const double logit_hi = std::log(0.95 / 0.05);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Eigen::MatrixXd w = random_partition(n, k, rng).indicator();
    state.beta = w.unaryExpr([&](double v) { return (v > 0.5 ? 1.0 : -1.0) * tau * logit_hi; });
    if (rank_ok(build_x(state.relaxed_w(), state.values))) return state;
  }
  throw InitializationError("initialize_state: no full-rank starting pattern found");
}

SampleLog run_chain(const Posterior& posterior, const ChainState& init, HmcConfig hmc, ExchangeConfig exchange,
                    const ChainConfig& config, Rng& rng) {
  if (config.iterations < 0 || config.warmup < 0 || config.thin < 1) throw ConfigError("chain", "counts must be non-negative, thin >= 1");
  if (!(hmc.step_size > 0.0) || hmc.leapfrog_steps < 1) throw ConfigError("hmc", "step size and leapfrog steps must be positive");
  SampleLog log;
  log.init = init;
  ChainState state = init;
  auto u = posterior.evaluate(state, nullptr);
  if (!u) throw InitializationError("run_chain: initial state is rank deficient");

  const int k = state.k();
  const Eigen::Index dim = Posterior::dimension(state);
  hmc.mass = resolve_mass(hmc.mass, dim);
  if (exchange.radius.size() == 0) exchange.radius = Eigen::VectorXd::Constant(k, exchange.default_radius);

  DualAveraging averaging(hmc.step_size, hmc.target_accept);
  const std::vector<int> windows = mass_window_ends(config.warmup);
  std::size_t window = 0;
  int window_count = 0;
  Eigen::VectorXd window_mean = Eigen::VectorXd::Zero(dim), window_m2 = Eigen::VectorXd::Zero(dim);
  const int window_start = config.warmup < 100 ? config.warmup : static_cast<int>(0.15 * config.warmup);

  const double tau_target = init.tau;
  int post_iters = 0, post_hmc_accepts = 0;
  double post_exch_accepts = 0.0;

  for (int it = 0; it < config.iterations; ++it) {
    const bool warming = it < config.warmup;
    if (warming && config.anneal_tau) {
      state.tau = config.tau_start + (tau_target - config.tau_start) * static_cast<double>(it) / config.warmup;
    } else {
      state.tau = tau_target;
    }

    const HmcStep h_step = hmc_update(state, posterior, hmc, rng);
    if (!h_step.valid) ++log.invalid_trajectories;
    const ExchangeStep e_step = exchange_update(state, posterior, exchange, rng);
    log.exchange_skips += static_cast<int>(std::count(e_step.skipped.begin(), e_step.skipped.end(), 1));

    if (warming) {
      hmc.step_size = averaging.update(h_step.accept_prob);
      const double rate = 1.0 / std::pow(it + 10.0, 0.6);
      for (int j = 0; j < k; ++j) {
        exchange.radius[j] *= std::exp(rate * ((e_step.accepted[j] ? 1.0 : 0.0) - exchange.target_accept));
      }
      if (window < windows.size() && it >= window_start) {
        // Welford accumulation of per-coordinate variance
        const Eigen::VectorXd s = Posterior::pack(state);
        ++window_count;
        const Eigen::VectorXd delta = s - window_mean;
        window_mean += delta / window_count;
        window_m2 += delta.cwiseProduct(s - window_mean);
        if (it + 1 == windows[window]) {
          if (window_count > 1) {
            const double c = window_count;
            const Eigen::VectorXd var = window_m2 / (c - 1.0);
            hmc.mass = (c / (c + 5.0)) * var.array() + 1e-3 * (5.0 / (c + 5.0));
          }
          averaging.restart(hmc.step_size);
          window_count = 0;
          window_mean.setZero();
          window_m2.setZero();
          ++window;
        }
      }
      if (it + 1 == config.warmup) hmc.step_size = averaging.final_step();
      continue;
    }

    ++post_iters;
    post_hmc_accepts += h_step.accepted ? 1 : 0;
    post_exch_accepts += e_step.acceptance();
    if ((it - config.warmup) % config.thin == 0) {
      u = posterior.evaluate(state, nullptr);
      log.draws.push_back(record(state, it, u.value_or(std::nan("")), h_step.accepted, e_step.acceptance(), hmc.step_size));
    }
  }
  log.step_size = hmc.step_size;
  log.mass = hmc.mass;
  log.radius = exchange.radius;
  if (post_iters > 0) {
    log.hmc_acceptance = static_cast<double>(post_hmc_accepts) / post_iters;
    log.exchange_acceptance = post_exch_accepts / post_iters;
  }
  return log;
}

Draw canonicalize(Draw draw) {
  for (Eigen::Index j = 0; j < draw.values.k(); ++j) {
    if (draw.values.a[j] >= draw.values.b[j]) continue;
    std::swap(draw.values.a[j], draw.values.b[j]);
    draw.probs.p[j] = 1.0 - draw.probs.p[j];
    for (Eigen::Index i = 0; i < draw.w.rows(); ++i) draw.w(i, j) = static_cast<unsigned char>(1 - draw.w(i, j));
  }
  return draw;
}

ChainState canonicalize(ChainState state) {
  for (Eigen::Index j = 0; j < state.values.k(); ++j) {
    if (state.values.a[j] >= state.values.b[j]) continue;
    std::swap(state.values.a[j], state.values.b[j]);
    state.probs.p[j] = 1.0 - state.probs.p[j];
    state.beta.col(j) = -state.beta.col(j);
  }
  return state;
}

}  // namespace msf
