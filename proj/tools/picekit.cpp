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

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "picekit/picekit.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitDivergence = 3;

int resolve_workers(std::optional<int> flag) {
  if (flag.has_value()) return *flag;
  if (const char* env = std::getenv("PICEKIT_WORKERS")) {
    try {
      return std::stoi(env);
    } catch (const std::exception&) {
      throw picekit::ConfigError("PICEKIT_WORKERS: expected an integer");
    }
  }
  return 0;  // auto
}

picekit::ExperimentConfig load(const std::string& config_path,
                               const std::vector<std::string>& overrides,
                               std::optional<std::int64_t> seed,
                               std::optional<std::string> out_dir,
                               std::vector<std::string>& violations) {
  picekit::ConfigMap map = picekit::parse_config_file(config_path);
  for (const std::string& assignment : overrides) picekit::apply_override(map, assignment);
  if (seed.has_value()) picekit::apply_override(map, "seed=" + std::to_string(*seed));
  if (out_dir.has_value()) picekit::apply_override(map, "out=\"" + *out_dir + "\"");
  return picekit::resolve_config(map, violations);
}

int run_command(const std::string& config_path, const std::vector<std::string>& overrides,
                std::optional<std::int64_t> seed, std::optional<std::string> out_dir,
                std::optional<int> workers) {
  std::vector<std::string> violations;
  const picekit::ExperimentConfig cfg =
      load(config_path, overrides, seed, out_dir, violations);
  if (const auto coupling = picekit::lambda_coupling_violation(cfg)) {
    violations.push_back(*coupling);
  }
  if (!violations.empty()) {
    for (const std::string& v : violations) std::cerr << "config error: " << v << '\n';
    return kExitConfig;
  }
  const auto artifacts = picekit::run_experiment(cfg, resolve_workers(workers));
  std::cout << "wrote " << artifacts.out_dir << "/result.json\n";
  return 0;
}

int validate_command(const std::string& config_path) {
  std::vector<std::string> violations;
  const picekit::ExperimentConfig cfg = load(config_path, {}, {}, {}, violations);

  const auto coupling = picekit::lambda_coupling_violation(cfg);
  for (const std::string& v : violations) std::cout << "violation: " << v << '\n';
  if (coupling.has_value()) {
    std::cout << "violation: " << *coupling << '\n';
  } else if (cfg.experiment == "lqg" || cfg.experiment == "pendulum") {
    std::cout << "lambda coupling: OK\n";
  }
  if (violations.empty() && !coupling.has_value()) {
    std::cout << "OK\n";
    return 0;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"picekit: path-integral control learning and smoothing experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::int64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;

  CLI::App* run = app.add_subcommand("run", "run an experiment configuration");
  run->add_option("config", config_path, "configuration file")->required();
  run->add_option("--set", overrides, "override a key, e.g. --set pice.iterations=10");
  run->add_option("--seed", seed, "override the random seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--workers", workers, "rollout worker threads (default: PICEKIT_WORKERS or auto)");

  CLI::App* validate = app.add_subcommand("validate", "check a configuration without running");
  validate->add_option("config", config_path, "configuration file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_command(config_path, overrides, seed, out_dir, workers);
    }
    return validate_command(config_path);
  } catch (const picekit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const picekit::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const picekit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
