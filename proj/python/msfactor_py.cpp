#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "msfactor/cli.hpp"
#include "msfactor/diagnostics.hpp"
#include "msfactor/errors.hpp"
#include "msfactor/whitening.hpp"

namespace py = pybind11;
using namespace msf;

namespace {

// Config and results cross the boundary as JSON text; the Python side wraps json.loads/dumps.
cli::RunConfig parse_config(const std::string& text) {
  cli::RunConfig c = nlohmann::json::parse(text).get<cli::RunConfig>();
  c.validate();
  return c;
}

ChainState make_state(const Eigen::MatrixXd& beta, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& p, const Eigen::MatrixXd& log_d, const Eigen::VectorXd& z, double tau) {
  ChainState st;
  st.beta = beta;
  st.values = {a, b};
  st.probs = {p};
  st.params = {log_d, z};
  st.tau = tau;
  return st;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-scale orthogonal factor models for multiple binary networks";

  // most specific last: pybind11 tries translators newest first
  static py::exception<Error> error(m, "Error", PyExc_ValueError);
  static py::exception<RankError> rank_error(m, "RankError", error.ptr());
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<ValidationError> validation_error(m, "ValidationError", error.ptr());
  static py::exception<FileError> file_error(m, "FileError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const RankError& e) {
      py::set_error(rank_error, e.what());
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const ValidationError& e) {
      py::set_error(validation_error, e.what());
    } catch (const FileError& e) {
      py::set_error(file_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("cholesky", &cholesky, py::arg("s"));
  m.def(
      "whiten",
      [](const Eigen::MatrixXd& x) {
        Whitening wt = whiten_with_factor(x);
        return py::make_tuple(wt.q, wt.l);
      },
      py::arg("x"), "Returns (Q, L) with Q = X L^{-T} and L L^T = X^T X.");
  m.def(
      "whiten_backward",
      [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& grad_q) {
        return whiten_backward(x, whiten_with_factor(x), grad_q);
      },
      py::arg("x"), py::arg("grad_q"));
  m.def("rank_ok", &rank_ok, py::arg("x"));
  m.def("orthonormality_error", &orthonormality_error, py::arg("q"));
  m.def("extract_column_partition", &extract_column_partition, py::arg("column"), py::arg("tol") = kGroupingTolerance);
  m.def(
      "build_x",
      [](const Eigen::MatrixXd& w, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return build_x(w, ColumnValues{a, b});
      },
      py::arg("w"), py::arg("a"), py::arg("b"));
  m.def(
      "log_g", [](const Eigen::MatrixXd& w, const Eigen::VectorXd& p) { return log_g(w, MixtureProbs{p}); },
      py::arg("w"), py::arg("p"));

  m.def(
      "random_partition",
      [](int n, int k, std::uint64_t seed) {
        Rng rng = make_rng(seed);
        return random_partition(n, k, rng).indicator();
      },
      py::arg("n"), py::arg("k"), py::arg("seed"), "n x k side indicator (1 = first side) of a random partition.");
  m.def(
      "cells_at_level",
      [](const Eigen::MatrixXd& indicator, int level) {
        return RecursivePartition::from_indicator(indicator).cells_at_level(level);
      },
      py::arg("indicator"), py::arg("level"));

  m.def(
      "potential",
      [](const std::vector<Eigen::MatrixXd>& adjacency, const Eigen::MatrixXd& beta, const Eigen::VectorXd& a,
         const Eigen::VectorXd& b, const Eigen::VectorXd& p, const Eigen::MatrixXd& log_d, const Eigen::VectorXd& z,
         double tau) {
        const NetworkDataset data(static_cast<int>(beta.rows()), adjacency);
        const Posterior posterior(data);
        const ChainState st = make_state(beta, a, b, p, log_d, z, tau);
        return py::make_tuple(posterior.potential(st), posterior.gradient(st));
      },
      py::arg("adjacency"), py::arg("beta"), py::arg("a"), py::arg("b"), py::arg("p"), py::arg("log_d"), py::arg("z"),
      py::arg("tau") = kDefaultTemperature,
      "Potential U and its gradient packed as (log_d, z, beta), column-major blocks.");

  m.def("ess_batch_means", [](const std::vector<double>& series) { return ess_batch_means(series); },
        py::arg("series"));
  m.def("subspace_error", &subspace_error, py::arg("q_hat"), py::arg("q0"));

  m.def(
      "_simulate",
      [](const std::string& config) {
        const SimulatedData sim = cli::cmd_simulate(parse_config(config));
        return nlohmann::json(sim.truth).dump();
      },
      py::arg("config"));
  m.def(
      "_fit",
      [](const std::string& config) {
        std::vector<cli::ChainResult> results;
        {
          py::gil_scoped_release release;
          results = cli::cmd_fit(parse_config(config));
        }
        nlohmann::json out = nlohmann::json::array();
        for (const auto& r : results) {
          out.push_back({{"draws", r.log.draws.size()},
                         {"hmc_acceptance", r.log.hmc_acceptance},
                         {"exchange_acceptance", r.log.exchange_acceptance},
                         {"step_size", r.log.step_size},
                         {"wall_seconds", r.wall_seconds}});
        }
        return out.dump();
      },
      py::arg("config"));
  m.def(
      "_summarize",
      [](const std::string& config, std::optional<std::string> truth) {
        std::optional<std::filesystem::path> truth_path;
        if (truth) truth_path = *truth;
        return cli::cmd_summarize(parse_config(config), truth_path).dump();
      },
      py::arg("config"), py::arg("truth") = std::nullopt);
}
