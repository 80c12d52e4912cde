#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msfactor/diagnostics.hpp"
#include "msfactor/sampler.hpp"

namespace msf::cli {

// Effective configuration of a run; every field has a default and may come
// from the --config JSON or a flag override.
struct RunConfig {
  std::uint64_t seed = 1;
  int k = 3;
  int iterations = 1000;
  int warmup = 500;
  int thin = 1;
  double tau = kDefaultTemperature;
  bool anneal_tau = false;
  double tau_start = 0.5;
  double step_size = 0.05;
  int leapfrog_steps = 20;
  double target_accept = 0.7;
  double radius = 0.25;
  int max_rejection_attempts = 1000;
  double exchange_target_accept = 0.35;
  int chains = 1;
  double burn_in = kDefaultBurnIn;
  std::vector<int> w_trace_nodes;
  std::string input = "dataset.json";
  std::string out = "out";

  // simulate only
  int n = 32;
  int subjects = 10;
  double loading_min = 20.0;
  double loading_max = 40.0;
  double edge_prob = 0.1;
  double value_separation = 1.0;  // truth draws need |a_j - b_j| >= this

  // Throws ConfigError naming the first bad field.
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& config);
// Unknown keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& config);

RunConfig load_config(const std::filesystem::path& path);

HmcConfig hmc_config(const RunConfig& config);
ExchangeConfig exchange_config(const RunConfig& config);
ChainConfig chain_config(const RunConfig& config);

// Writes dataset.json, truth.json and config.json under config.out.
SimulatedData cmd_simulate(const RunConfig& config);

struct ChainResult {
  SampleLog log;
  double wall_seconds = 0.0;
};

// Runs config.chains chains (seeded by (seed, chain id)) concurrently and writes
// chain_<c>/{trace.csv, w_trace.csv, run_meta.json} plus config.json.
std::vector<ChainResult> cmd_fit(const RunConfig& config);

// Reads every chain_<c> directory under config.out, pools the draws and writes
// summary.json and factors/factor_<j>.csv.
nlohmann::json cmd_summarize(const RunConfig& config, const std::optional<std::filesystem::path>& truth_path);

void write_trace_csv(const std::filesystem::path& path, const SampleLog& log);
void write_w_trace_csv(const std::filesystem::path& path, const SampleLog& log, const std::vector<int>& nodes);
// Rebuilds draws from a trace pair; the w trace must cover every node.
std::vector<Draw> read_traces(const std::filesystem::path& trace_csv, const std::filesystem::path& w_trace_csv);

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace msf::cli
