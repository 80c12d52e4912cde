#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "msfactor/cli.hpp"
#include "msfactor/errors.hpp"

using namespace msf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("msfactor_test_" + name + "_" + std::to_string(std::random_device{}()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

cli::RunConfig small_config(const fs::path& dir) {
  cli::RunConfig c;
  c.n = 8;
  c.k = 2;
  c.subjects = 2;
  c.iterations = 10;
  c.warmup = 5;
  c.leapfrog_steps = 5;
  c.burn_in = 0.0;
  c.out = dir.string();
  c.input = (dir / "dataset.json").string();
  return c;
}

}  // namespace

TEST_CASE("RunConfig json round trip and validation") {
  cli::RunConfig c;
  c.seed = 99;
  c.w_trace_nodes = {0, 3};
  c.anneal_tau = true;
  const nlohmann::json j = c;
  const auto back = j.get<cli::RunConfig>();
  CHECK(nlohmann::json(back) == j);

  nlohmann::json bad = j;
  bad["leapfrog"] = 3;
  CHECK_THROWS_AS(bad.get<cli::RunConfig>(), ConfigError);
  bad = j;
  bad["k"] = "three";
  CHECK_THROWS_AS(bad.get<cli::RunConfig>(), ConfigError);

  cli::RunConfig v;
  v.warmup = v.iterations + 1;
  try {
    v.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "warmup");
  }
  v = cli::RunConfig{};
  v.tau = 0.0;
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v = cli::RunConfig{};
  v.value_separation = -1.0;
  CHECK_THROWS_AS(v.validate(), ConfigError);
  v = cli::RunConfig{};
  v.k = 0;
  CHECK_THROWS_AS(v.validate(), ConfigError);
}

TEST_CASE("matrix csv round trip keeps full precision") {
  const fs::path dir = scratch("csv");
  Eigen::MatrixXd m(2, 3);
  m << 1.0 / 3.0, -2e-17, 5.0, std::exp(1.0), 0.0, -1e10;
  cli::write_matrix_csv(dir / "m.csv", m);
  CHECK(cli::read_matrix_csv(dir / "m.csv") == m);
  CHECK_THROWS_AS(cli::read_matrix_csv(dir / "missing.csv"), FileError);
  fs::remove_all(dir);
}

TEST_CASE("simulate, fit and summarize") {
  const fs::path dir = scratch("pipeline");
  const cli::RunConfig c = small_config(dir);

  const SimulatedData sim = cli::cmd_simulate(c);
  CHECK(fs::exists(dir / "dataset.json"));
  CHECK(fs::exists(dir / "truth.json"));
  const auto data = cli::read_json(dir / "dataset.json").get<NetworkDataset>();
  CHECK(data.n() == 8);
  CHECK(data.subjects() == 2);
  CHECK(data.adjacency(1) == sim.data.adjacency(1));
  CHECK(((sim.truth.values.a - sim.truth.values.b).array().abs() >= c.value_separation).all());
  // same seed, same dataset
  const fs::path dir2 = scratch("pipeline2");
  cli::RunConfig c2 = c;
  c2.out = dir2.string();
  CHECK(cli::cmd_simulate(c2).data.adjacency(0) == sim.data.adjacency(0));

  SUBCASE("one chain") {
    const auto results = cli::cmd_fit(c);
    REQUIRE(results.size() == 1);
    CHECK(results[0].log.draws.size() == 5);
    const fs::path chain = dir / "chain_0";
    CHECK(fs::exists(chain / "run_meta.json"));
    const auto draws = cli::read_traces(chain / "trace.csv", chain / "w_trace.csv");
    REQUIRE(draws.size() == 5);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      const Draw& d = results[0].log.draws[i];
      CHECK(draws[i].potential == d.potential);
      CHECK(draws[i].values.a == d.values.a);
      CHECK(draws[i].probs.p == d.probs.p);
      CHECK(draws[i].log_d == d.log_d);
      CHECK(draws[i].w == d.w);
    }

    const nlohmann::json without = cli::cmd_summarize(c, std::nullopt);
    CHECK(without.contains("w_prob"));
    CHECK(!without.contains("subspace_error"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "factors" / "factor_2.csv"));

    const nlohmann::json with = cli::cmd_summarize(c, dir / "truth.json");
    CHECK(with["partition_recovery"].size() == 2);
  }
  SUBCASE("two chains are seeded apart") {
    cli::RunConfig two = c;
    two.chains = 2;
    const auto results = cli::cmd_fit(two);
    REQUIRE(results.size() == 2);
    CHECK(results[0].log.draws.back().potential != results[1].log.draws.back().potential);
    CHECK(cli::cmd_summarize(two, std::nullopt)["draws_used"] == 10);
  }
  SUBCASE("fit is reproducible") {
    const auto r1 = cli::cmd_fit(c);
    const auto r2 = cli::cmd_fit(c);
    CHECK(r1[0].log.draws.back().potential == r2[0].log.draws.back().potential);
  }
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("fit rejects an invalid dataset file") {
  const fs::path dir = scratch("invalid");
  std::ofstream(dir / "dataset.json") << R"({"n": 2, "subjects": [[[0, 1], [0, 0]]]})";
  const cli::RunConfig c = small_config(dir);
  CHECK_THROWS_AS(cli::cmd_fit(c), ValidationError);
  cli::RunConfig missing = c;
  missing.input = (dir / "nope.json").string();
  CHECK_THROWS_AS(cli::cmd_fit(missing), FileError);
  CHECK_THROWS_AS(cli::cmd_summarize(c, std::nullopt), FileError);
  fs::remove_all(dir);
}
