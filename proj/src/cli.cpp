#include "msfactor/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "msfactor/errors.hpp"
#include "msfactor/json_eigen.hpp"
#include "msfactor/whitening.hpp"

namespace fs = std::filesystem;

namespace msf::cli {

void RunConfig::validate() const {
  auto positive = [](const char* field, double v) {
    if (!(v > 0)) throw ConfigError(field, "must be positive");
  };
  positive("k", k);
  if (iterations < 0) throw ConfigError("iterations", "must be non-negative");
  if (warmup < 0) throw ConfigError("warmup", "must be non-negative");
  if (warmup > iterations) throw ConfigError("warmup", "exceeds iterations");
  positive("thin", thin);
  positive("tau", tau);
  positive("tau_start", tau_start);
  positive("step_size", step_size);
  positive("leapfrog_steps", leapfrog_steps);
  if (!(target_accept > 0 && target_accept < 1)) throw ConfigError("target_accept", "must lie in (0,1)");
  positive("radius", radius);
  positive("max_rejection_attempts", max_rejection_attempts);
  if (!(exchange_target_accept > 0 && exchange_target_accept < 1)) throw ConfigError("exchange_target_accept", "must lie in (0,1)");
  positive("chains", chains);
  if (!(burn_in >= 0 && burn_in < 1)) throw ConfigError("burn_in", "must lie in [0,1)");
  positive("n", n);
  if (n < k) throw ConfigError("n", "must be at least k");
  if (subjects < 0) throw ConfigError("subjects", "must be non-negative");
  positive("loading_min", loading_min);
  if (loading_max < loading_min) throw ConfigError("loading_max", "must be at least loading_min");
  if (!(edge_prob > 0 && edge_prob < 1)) throw ConfigError("edge_prob", "must lie in (0,1)");
  if (!(value_separation >= 0 && value_separation < 3)) throw ConfigError("value_separation", "must lie in [0,3)");
  if (out.empty()) throw ConfigError("out", "must not be empty");
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"seed", c.seed},
       {"k", c.k},
       {"iterations", c.iterations},
       {"warmup", c.warmup},
       {"thin", c.thin},
       {"tau", c.tau},
       {"anneal_tau", c.anneal_tau},
       {"tau_start", c.tau_start},
       {"step_size", c.step_size},
       {"leapfrog_steps", c.leapfrog_steps},
       {"target_accept", c.target_accept},
       {"radius", c.radius},
       {"max_rejection_attempts", c.max_rejection_attempts},
       {"exchange_target_accept", c.exchange_target_accept},
       {"chains", c.chains},
       {"burn_in", c.burn_in},
       {"w_trace_nodes", c.w_trace_nodes},
       {"input", c.input},
       {"out", c.out},
       {"n", c.n},
       {"subjects", c.subjects},
       {"loading_min", c.loading_min},
       {"loading_max", c.loading_max},
       {"edge_prob", c.edge_prob},
       {"value_separation", c.value_separation}};
}

namespace {

template <class T>
void read_field(const nlohmann::json& j, const std::string& key, T& value) {
  try {
    value = j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, std::string("wrong type: ") + e.what());
  }
}

}  // namespace

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") read_field(value, key, c.seed);
    else if (key == "k") read_field(value, key, c.k);
    else if (key == "iterations") read_field(value, key, c.iterations);
    else if (key == "warmup") read_field(value, key, c.warmup);
    else if (key == "thin") read_field(value, key, c.thin);
    else if (key == "tau") read_field(value, key, c.tau);
    else if (key == "anneal_tau") read_field(value, key, c.anneal_tau);
    else if (key == "tau_start") read_field(value, key, c.tau_start);
    else if (key == "step_size") read_field(value, key, c.step_size);
    else if (key == "leapfrog_steps") read_field(value, key, c.leapfrog_steps);
    else if (key == "target_accept") read_field(value, key, c.target_accept);
    else if (key == "radius") read_field(value, key, c.radius);
    else if (key == "max_rejection_attempts") read_field(value, key, c.max_rejection_attempts);
    else if (key == "exchange_target_accept") read_field(value, key, c.exchange_target_accept);
    else if (key == "chains") read_field(value, key, c.chains);
    else if (key == "burn_in") read_field(value, key, c.burn_in);
    else if (key == "w_trace_nodes") read_field(value, key, c.w_trace_nodes);
    else if (key == "input") read_field(value, key, c.input);
    else if (key == "out") read_field(value, key, c.out);
    else if (key == "n") read_field(value, key, c.n);
    else if (key == "subjects") read_field(value, key, c.subjects);
    else if (key == "loading_min") read_field(value, key, c.loading_min);
    else if (key == "loading_max") read_field(value, key, c.loading_max);
    else if (key == "edge_prob") read_field(value, key, c.edge_prob);
    else if (key == "value_separation") read_field(value, key, c.value_separation);
    else throw ConfigError(key, "unknown config key");
  }
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RunConfig load_config(const fs::path& path) { return read_json(path).get<RunConfig>(); }

HmcConfig hmc_config(const RunConfig& c) {
  HmcConfig h;
  h.step_size = c.step_size;
  h.leapfrog_steps = c.leapfrog_steps;
  h.target_accept = c.target_accept;
  return h;
}

ExchangeConfig exchange_config(const RunConfig& c) {
  ExchangeConfig e;
  e.default_radius = c.radius;
  e.max_rejection_attempts = c.max_rejection_attempts;
  e.target_accept = c.exchange_target_accept;
  return e;
}

ChainConfig chain_config(const RunConfig& c) {
  ChainConfig cc;
  cc.iterations = c.iterations;
  cc.warmup = c.warmup;
  cc.thin = c.thin;
  cc.anneal_tau = c.anneal_tau;
  cc.tau_start = c.tau_start;
  cc.w_trace_nodes = c.w_trace_nodes;
  return cc;
}

SimulatedData cmd_simulate(const RunConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed);
  const int n = config.n, k = config.k;
  RecursivePartition partition;
  ColumnValues values;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) throw RankError("simulate: no full-rank truth found", -1);
    partition = random_partition(n, k, rng);
    values = {Eigen::VectorXd(k), Eigen::VectorXd(k)};
    for (int j = 0; j < k; ++j) {
      // a level with a_j close to b_j leaves column j nearly constant and the split unidentifiable
      do {
        values.a[j] = standard_normal(rng);
        values.b[j] = standard_normal(rng);
      } while (std::abs(values.a[j] - values.b[j]) < config.value_separation);
    }
    if (rank_ok(build_x(partition.indicator(), values))) break;
  }
  MixtureProbs probs{partition.indicator().colwise().mean().transpose()};
  SubjectParams params{Eigen::MatrixXd(config.subjects, k), Eigen::VectorXd(config.subjects)};
  const double offset = std::log(config.edge_prob) - std::log1p(-config.edge_prob);
  for (int s = 0; s < config.subjects; ++s) {
    for (int j = 0; j < k; ++j) {
      params.log_d(s, j) = std::log(config.loading_min + (config.loading_max - config.loading_min) * uniform01(rng));
    }
    params.z[s] = offset;
  }
  SimulatedData sim = simulate_dataset(partition, values, probs, params, rng);
  const fs::path out(config.out);
  write_json(out / "dataset.json", sim.data);
  write_json(out / "truth.json", sim.truth);
  write_json(out / "config.json", config);
  return sim;
}

namespace {

std::ofstream open_csv(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FileError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split(line));
  }
  if (rows.empty()) throw FileError(path.string() + " is empty");
  return rows;
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ValidationError(path.string() + ": cannot parse '" + s + "'");
  }
}

}  // namespace

void write_trace_csv(const fs::path& path, const SampleLog& log) {
  auto out = open_csv(path);
  const auto k = log.init.k();
  const auto subjects = log.init.params.subjects();
  out << "iteration,U,hmc_accept,exch_accept,h";
  for (const char* name : {"a", "b", "p"}) {
    for (int j = 1; j <= k; ++j) out << ',' << name << '_' << j;
  }
  for (int s = 1; s <= subjects; ++s) out << ",z_" << s;
  for (int s = 1; s <= subjects; ++s) {
    for (int j = 1; j <= k; ++j) out << ",log_d_" << s << '_' << j;
  }
  out << '\n';
  for (const Draw& d : log.draws) {
    out << d.iteration << ',' << d.potential << ',' << (d.hmc_accept ? 1 : 0) << ',' << d.exch_accept << ','
        << d.step_size;
    for (int j = 0; j < k; ++j) out << ',' << d.values.a[j];
    for (int j = 0; j < k; ++j) out << ',' << d.values.b[j];
    for (int j = 0; j < k; ++j) out << ',' << d.probs.p[j];
    for (int s = 0; s < subjects; ++s) out << ',' << d.z[s];
    for (int s = 0; s < subjects; ++s) {
      for (int j = 0; j < k; ++j) out << ',' << d.log_d(s, j);
    }
    out << '\n';
  }
}

void write_w_trace_csv(const fs::path& path, const SampleLog& log, const std::vector<int>& nodes) {
  auto out = open_csv(path);
  const int k = log.init.k();
  std::vector<int> selected = nodes;
  if (selected.empty()) {
    for (int i = 0; i < log.init.n(); ++i) selected.push_back(i);
  }
  for (int i : selected) {
    if (i < 0 || i >= log.init.n()) throw ConfigError("w_trace_nodes", "node " + std::to_string(i) + " out of range");
  }
  out << "iteration";
  for (int i : selected) {
    for (int j = 1; j <= k; ++j) out << ",w_" << i << '_' << j;
  }
  out << '\n';
  for (const Draw& d : log.draws) {
    out << d.iteration;
    for (int i : selected) {
      for (int j = 0; j < k; ++j) out << ',' << static_cast<int>(d.w(i, j));
    }
    out << '\n';
  }
}

std::vector<Draw> read_traces(const fs::path& trace_csv, const fs::path& w_trace_csv) {
  const auto trace = read_csv(trace_csv);
  const auto wtrace = read_csv(w_trace_csv);
  const auto& header = trace.front();
  int k = 0, subjects = 0;
  for (const auto& h : header) {
    if (h.rfind("a_", 0) == 0) ++k;
    if (h.rfind("z_", 0) == 0) ++subjects;
  }
  const std::size_t expected = 5 + 3 * static_cast<std::size_t>(k) + subjects + static_cast<std::size_t>(subjects) * k;
  if (header.size() != expected) throw ValidationError(trace_csv.string() + ": unexpected column count");

  std::vector<std::pair<int, int>> w_columns;
  int n = 0;
  for (std::size_t c = 1; c < wtrace.front().size(); ++c) {
    const std::string& h = wtrace.front()[c];
    const auto sep = h.rfind('_');
    if (h.rfind("w_", 0) != 0 || sep == std::string::npos || sep < 2) throw ValidationError(w_trace_csv.string() + ": bad header " + h);
    const int node = std::stoi(h.substr(2, sep - 2));
    const int level = std::stoi(h.substr(sep + 1));
    w_columns.emplace_back(node, level - 1);
    n = std::max(n, node + 1);
  }
  if (static_cast<int>(w_columns.size()) != n * k) {
    throw FileError(w_trace_csv.string() + ": w trace does not cover every node; cannot rebuild Q");
  }
  if (wtrace.size() != trace.size()) throw ValidationError("trace files disagree on row count");

  std::vector<Draw> draws;
  for (std::size_t r = 1; r < trace.size(); ++r) {
    const auto& row = trace[r];
    const auto& wrow = wtrace[r];
    if (row.size() != expected || wrow.size() != w_columns.size() + 1) throw ValidationError(trace_csv.string() + ": ragged row " + std::to_string(r));
    Draw d;
    std::size_t c = 0;
    d.iteration = static_cast<int>(to_double(row[c++], trace_csv));
    if (static_cast<int>(to_double(wrow[0], w_trace_csv)) != d.iteration) throw ValidationError("trace files disagree on iteration at row " + std::to_string(r));
    d.potential = to_double(row[c++], trace_csv);
    d.hmc_accept = to_double(row[c++], trace_csv) != 0.0;
    d.exch_accept = to_double(row[c++], trace_csv);
    d.step_size = to_double(row[c++], trace_csv);
    d.values = {Eigen::VectorXd(k), Eigen::VectorXd(k)};
    d.probs = {Eigen::VectorXd(k)};
    for (int j = 0; j < k; ++j) d.values.a[j] = to_double(row[c++], trace_csv);
    for (int j = 0; j < k; ++j) d.values.b[j] = to_double(row[c++], trace_csv);
    for (int j = 0; j < k; ++j) d.probs.p[j] = to_double(row[c++], trace_csv);
    d.z.resize(subjects);
    for (int s = 0; s < subjects; ++s) d.z[s] = to_double(row[c++], trace_csv);
    d.log_d.resize(subjects, k);
    for (int s = 0; s < subjects; ++s) {
      for (int j = 0; j < k; ++j) d.log_d(s, j) = to_double(row[c++], trace_csv);
    }
    d.w.resize(n, k);
    for (std::size_t col = 0; col < w_columns.size(); ++col) {
      d.w(w_columns[col].first, w_columns[col].second) = wrow[col + 1] == "1" ? 1 : 0;
    }
    draws.push_back(std::move(d));
  }
  return draws;
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m) {
  auto out = open_csv(path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  const auto rows = read_csv(path);
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw ValidationError(path.string() + ": ragged row");
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = to_double(rows[r][c], path);
  }
  return m;
}

std::vector<ChainResult> cmd_fit(const RunConfig& config) {
  config.validate();
  const NetworkDataset data = read_json(config.input).get<NetworkDataset>();
  if (data.n() < config.k) throw ConfigError("k", "exceeds node count " + std::to_string(data.n()));
  const Posterior posterior(data);
  const fs::path out(config.out);
  write_json(out / "config.json", config);

  std::vector<ChainResult> results(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  auto run = [&](int c) {
    try {
      const auto start = std::chrono::steady_clock::now();
      Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(c));
      const ChainState init = initialize_state(data, config.k, config.tau, rng);
      results[c].log = run_chain(posterior, init, hmc_config(config), exchange_config(config), chain_config(config), rng);
      results[c].wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  std::vector<std::thread> workers;
  for (int c = 1; c < config.chains; ++c) workers.emplace_back(run, c);
  run(0);
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (int c = 0; c < config.chains; ++c) {
    const fs::path dir = out / ("chain_" + std::to_string(c));
    const SampleLog& log = results[c].log;
    write_trace_csv(dir / "trace.csv", log);
    write_w_trace_csv(dir / "w_trace.csv", log, config.w_trace_nodes);
    nlohmann::json meta = {{"config", config},
                           {"chain", c},
                           {"draws", log.draws.size()},
                           {"hmc_acceptance", log.hmc_acceptance},
                           {"exchange_acceptance", log.exchange_acceptance},
                           {"exchange_skips", log.exchange_skips},
                           {"invalid_trajectories", log.invalid_trajectories},
                           {"adapted_step_size", log.step_size},
                           {"adapted_radius", log.radius},
                           {"adapted_mass_min", log.mass.size() ? log.mass.minCoeff() : 0.0},
                           {"adapted_mass_max", log.mass.size() ? log.mass.maxCoeff() : 0.0},
                           {"wall_seconds", results[c].wall_seconds}};
    write_json(dir / "run_meta.json", meta);
  }
  return results;
}

nlohmann::json cmd_summarize(const RunConfig& config, const std::optional<fs::path>& truth_path) {
  config.validate();
  const fs::path out(config.out);
  std::vector<Draw> pooled;
  nlohmann::json per_chain = nlohmann::json::array();
  std::map<int, fs::path> chain_dirs;
  if (fs::is_directory(out)) {
    for (const auto& entry : fs::directory_iterator(out)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_directory() && name.rfind("chain_", 0) == 0) chain_dirs[std::stoi(name.substr(6))] = entry.path();
    }
  }
  if (chain_dirs.empty()) throw FileError("no chain_* trace directories under " + out.string());
  for (const auto& [id, dir] : chain_dirs) {
    const std::vector<Draw> draws = read_traces(dir / "trace.csv", dir / "w_trace.csv");
    const auto skip = static_cast<std::size_t>(std::floor(config.burn_in * static_cast<double>(draws.size())));
    nlohmann::json chain = {{"chain", id}, {"draws", draws.size()}};
    if (draws.size() > skip) {
      const PosteriorSummary s = summarize(draws, config.burn_in);
      chain["ess"] = s.ess;
      pooled.insert(pooled.end(), draws.begin() + static_cast<std::ptrdiff_t>(skip), draws.end());
    }
    per_chain.push_back(std::move(chain));
  }
  const PosteriorSummary summary = summarize(pooled, 0.0);
  nlohmann::json result = summary;
  result["chains"] = per_chain;
  if (truth_path) {
    const SyntheticTruth truth = read_json(*truth_path).get<SyntheticTruth>();
    if (summary.q_hat.size()) result["subspace_error"] = subspace_error(summary.q_hat, truth.q0);
    nlohmann::json recovery = nlohmann::json::array();
    for (int j = 1; j <= truth.partition.k(); ++j) recovery.push_back(partition_recovery(summary, truth.partition, j));
    result["partition_recovery"] = recovery;
  }
  write_json(out / "summary.json", result);
  for (std::size_t j = 0; j < summary.factors.size(); ++j) {
    write_matrix_csv(out / "factors" / ("factor_" + std::to_string(j + 1) + ".csv"), summary.factors[j]);
  }
  return result;
}

}  // namespace msf::cli
