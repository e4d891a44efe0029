// Copyright 2026 The picekit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "picekit/benchmarks.hpp"
#include "picekit/config.hpp"
#include "picekit/csv.hpp"
#include "picekit/pice.hpp"
#include "picekit/smoother.hpp"
#include "picekit/version.hpp"

namespace picekit {

/// Experiment driver shared by the command-line tool and the test suites:
/// builds the configured problem, runs the learning or smoothing loop, and
/// writes the result files.
///
/// Files written to the output directory:
///   trace.csv     per-iteration quantities; byte-identical across reruns and
///                 worker counts for a fixed (config, seed)
///   timing.csv    per-iteration wall clock (not covered by the byte-identity
///                 guarantee, which is why it is a separate file)
///   result.json   final parameters, estimates, seed and the resolved config
///   marginals.csv, controller.csv, observations.csv   smoother runs only

namespace detail {

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline void write_timing_csv(const std::string& path, const std::vector<double>& seconds) {
  CsvWriter csv(path);
  csv.header({"iter", "seconds"});
  for (std::size_t k = 0; k < seconds.size(); ++k) {
    csv.field(static_cast<std::int64_t>(k)).field(seconds[k]);
    csv.end_row();
  }
}

inline void write_result_json(const std::string& path, const nlohmann::json& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << result.dump(2) << '\n';
}

}  // namespace detail

struct RunArtifacts {
  nlohmann::json result;
  std::string out_dir;
};

/// Learning experiments (lqg, pendulum): adaptive importance sampling over the
/// configured controller, trace written per iteration.
inline RunArtifacts run_learning_experiment(const ExperimentConfig& cfg, int workers) {
  ControlProblem problem;
  std::unique_ptr<Policy> policy;
  const bool timedep_mode = cfg.pice.mode == PiceMode::kClosedFormTimedep ||
                            cfg.pice.mode == PiceMode::kGradientTimedep;
  if (cfg.experiment == "lqg") {
    problem = build_lqg(cfg.lqg);
    if (timedep_mode) {
      policy = std::make_unique<LinearBasisPolicy>(1, lqg_basis(), problem.grid);
    } else {
      policy = std::make_unique<LinearBasisPolicy>(1, lqg_basis());
    }
  } else {
    problem = build_pendulum(cfg.pendulum);
    if (timedep_mode) {
      throw ConfigError("pice.mode: the pendulum grid controller is time-independent; use a "
                        "static mode");
    }
    policy = std::make_unique<TabularGridPolicy>(make_pendulum_policy(cfg.pendulum));
  }

  PiceConfig pice_config = cfg.pice;
  pice_config.rollout.divergence_bound = cfg.divergence_bound;
  pice_config.rollout.workers = workers;

  const auto started = std::chrono::steady_clock::now();
  const PiceTrace trace = run_adaptive(problem, *policy, pice_config);
  const double total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  // Trace: iter, J_hat, ess, theta_0..theta_{P-1}, grad_norm.
  {
    CsvWriter csv(cfg.out_dir + "/trace.csv");
    std::vector<std::string> names = {"iter", "J_hat", "ess"};
    for (std::int64_t p = 0; p < policy->param_count(); ++p) {
      names.push_back("theta_" + std::to_string(p));
    }
    names.push_back("grad_norm");
    csv.header(names);
    for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
      const PiceIterate& it = trace.iterates[k];
      csv.field(static_cast<std::int64_t>(k)).field(it.j_hat).field(it.ess);
      for (Eigen::Index p = 0; p < it.theta.size(); ++p) csv.field(it.theta(p));
      csv.field(it.grad_norm);
      csv.end_row();
    }
  }
  {
    std::vector<double> seconds;
    seconds.reserve(trace.iterates.size());
    for (const PiceIterate& it : trace.iterates) seconds.push_back(it.seconds);
    detail::write_timing_csv(cfg.out_dir + "/timing.csv", seconds);
  }

  RunArtifacts artifacts;
  artifacts.out_dir = cfg.out_dir;
  nlohmann::json& result = artifacts.result;
  result["version"] = kVersion;
  result["experiment"] = cfg.experiment;
  result["seed"] = cfg.seed;
  result["config"] = cfg.echo;
  result["iterations_run"] = trace.iterates.size();
  result["flagged_trajectories"] = trace.flagged_trajectories;
  result["skipped_updates"] = trace.skipped_updates;
  result["total_seconds"] = total_seconds;
  result["policy"] = policy->describe();
  if (!trace.iterates.empty()) {
    const PiceIterate& last = trace.iterates.back();
    result["final"]["J_hat"] = last.j_hat;
    result["final"]["ess"] = last.ess;
    result["final"]["theta"] = detail::vector_to_json(last.theta);
  } else {
    result["final"]["theta"] = detail::vector_to_json(policy->params());
  }
  detail::write_result_json(cfg.out_dir + "/result.json", artifacts.result);
  return artifacts;
}

/// Smoother experiment: builds the two-unit network, loads or simulates the
/// observations, runs the adaptive proposal loop and writes marginals plus the
/// fitted controller.
inline RunArtifacts run_smoother_experiment(const ExperimentConfig& cfg, int workers) {
  NeuralNetSpec spec = make_neural_net_spec(cfg.smoother.model_seed, cfg.smoother.coupling_std,
                                            cfg.smoother.bias_std);
  spec.sigma_dyn_sq = cfg.smoother.sigma_dyn_sq;
  spec.sigma_obs = cfg.smoother.sigma_obs;
  spec.horizon = cfg.smoother.horizon;
  spec.dt = cfg.dt;

  bool simulated_observations = false;
  if (!cfg.smoother.observations_path.empty()) {
    for (const auto& [time, value] : read_time_value_csv(cfg.smoother.observations_path)) {
      spec.observations.push_back({time, value});
    }
  } else {
    spec.observations = simulate_observations(
        spec,
        default_observation_times(spec.horizon,
                                  static_cast<int>(cfg.smoother.num_observations)),
        derive_seed(cfg.smoother.model_seed, 0x0B5E7EDu));
    simulated_observations = true;
  }

  const ControlProblem problem = build_neural_net(spec);

  SmootherConfig smoother_config = cfg.smoother.config;
  smoother_config.seed = cfg.seed;
  smoother_config.rollout.divergence_bound = cfg.divergence_bound;
  smoother_config.rollout.workers = workers;

  const auto started = std::chrono::steady_clock::now();
  const SmootherResult result = run_smoother(problem, smoother_config);
  const double total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  {
    CsvWriter csv(cfg.out_dir + "/trace.csv");
    csv.header({"iter", "J_hat", "ess"});
    for (std::size_t k = 0; k < result.trace.size(); ++k) {
      const SmootherIterate& it = result.trace[k];
      csv.field(static_cast<std::int64_t>(k))
          .field(-problem.cost.temperature * it.log_psi_hat)
          .field(it.ess);
      csv.end_row();
    }
  }
  {
    std::vector<double> seconds;
    seconds.reserve(result.trace.size());
    for (const SmootherIterate& it : result.trace) seconds.push_back(it.seconds);
    detail::write_timing_csv(cfg.out_dir + "/timing.csv", seconds);
  }
  {
    CsvWriter csv(cfg.out_dir + "/marginals.csv");
    std::vector<std::string> names = {"time"};
    for (int d = 1; d <= problem.model.state_dim; ++d) names.push_back("mean_" + std::to_string(d));
    for (int d = 1; d <= problem.model.state_dim; ++d) names.push_back("std_" + std::to_string(d));
    csv.header(names);
    for (std::int64_t j = 0; j <= problem.grid.steps; ++j) {
      csv.field(problem.grid.time(j));
      for (int d = 0; d < problem.model.state_dim; ++d) csv.field(result.mean(j, d));
      for (int d = 0; d < problem.model.state_dim; ++d) csv.field(result.std(j, d));
      csv.end_row();
    }
  }
  {
    CsvWriter csv(cfg.out_dir + "/controller.csv");
    std::vector<std::string> names = {"time"};
    const int m = problem.model.control_dim;
    const int n = problem.model.state_dim;
    for (int a = 1; a <= m; ++a) {
      for (int s = 1; s <= n; ++s) {
        names.push_back("a_" + std::to_string(a) + std::to_string(s));
      }
    }
    for (int a = 1; a <= m; ++a) names.push_back("b_" + std::to_string(a));
    csv.header(names);
    for (std::int64_t j = 0; j < problem.grid.steps; ++j) {
      csv.field(problem.grid.time(j));
      const Matrix& gain = result.gain[static_cast<std::size_t>(j)];
      for (int a = 0; a < m; ++a) {
        for (int s = 0; s < n; ++s) csv.field(gain(a, s));
      }
      const Vector& offset = result.offset[static_cast<std::size_t>(j)];
      for (int a = 0; a < m; ++a) csv.field(offset(a));
      csv.end_row();
    }
  }
  if (simulated_observations) {
    CsvWriter csv(cfg.out_dir + "/observations.csv");
    csv.header({"time", "value"});
    for (const Observation& obs : spec.observations) {
      csv.field(obs.time).field(obs.value);
      csv.end_row();
    }
  }

  RunArtifacts artifacts;
  artifacts.out_dir = cfg.out_dir;
  nlohmann::json& out = artifacts.result;
  out["version"] = kVersion;
  out["experiment"] = cfg.experiment;
  out["seed"] = cfg.seed;
  out["config"] = cfg.echo;
  out["total_seconds"] = total_seconds;
  out["flagged_trajectories"] = result.flagged_trajectories;
  out["model"] = {{"coupling", detail::vector_to_json(
                                   (Vector(2) << spec.coupling(0, 1), spec.coupling(1, 0))
                                       .finished())},
                  {"bias", detail::vector_to_json(spec.bias)}};
  out["final"]["ess"] = result.final_ess;
  out["final"]["log_psi"] = result.final_log_psi;
  out["final"]["J_hat"] = -problem.cost.temperature * result.final_log_psi;
  detail::write_result_json(cfg.out_dir + "/result.json", artifacts.result);
  return artifacts;
}

/// Runs a resolved configuration end to end. Throws on failure; use the
/// exception type to pick the process exit code (ConfigError 1,
/// DivergenceError 3, anything else 2).
inline RunArtifacts run_experiment(const ExperimentConfig& cfg, int workers) {
  std::filesystem::create_directories(cfg.out_dir);
  if (cfg.experiment == "smoother") return run_smoother_experiment(cfg, workers);
  return run_learning_experiment(cfg, workers);
}

}  // namespace picekit
