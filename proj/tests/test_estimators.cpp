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

#include <catch2/catch.hpp>
#include <cmath>
#include <vector>

#include "picekit/benchmarks.hpp"
#include "picekit/estimators.hpp"
#include "picekit/simulate.hpp"
#include "support/oracles.hpp"

using picekit::Matrix;
using picekit::TimeGrid;
using picekit::Vector;
using picekit::ZeroPolicy;

namespace {

picekit::ControlProblem costless_problem(double nu, double horizon, double dt) {
  picekit::ControlProblem problem;
  problem.model = picekit::make_model(
      1, 1, [](double, const Vector& x) { return Vector::Zero(x.size()); },
      [](double, const Vector&) { return Matrix::Identity(1, 1); },
      Matrix::Constant(1, 1, nu));
  problem.cost.state_cost = [](double, const Vector&) { return 0.0; };
  problem.cost.terminal_cost = [](const Vector&) { return 0.0; };
  problem.cost.control_weight = Matrix::Constant(1, 1, 1.0 / nu);  // lambda = 1
  problem.cost.temperature = 1.0;
  problem.grid = TimeGrid(0.0, dt, static_cast<std::int64_t>(std::llround(horizon / dt)));
  problem.init = picekit::InitialState::fixed(Vector::Zero(1));
  return problem;
}

double analytic_j(const picekit::LqgSpec& s, double t, double x) {
  return picekit::lqg_analytic_value(s.q, s.r, s.nu, s.horizon, t, x);
}

}  // namespace

TEST_CASE("a costless problem has unit normalizer and zero cost-to-go", "[estimator]") {
  const auto problem = costless_problem(1.0, 0.5, 0.05);
  const ZeroPolicy uncontrolled(1);
  const auto batch =
      picekit::rollout(problem.model, uncontrolled, problem.init, problem.grid, 64, 5);
  const auto costs = picekit::path_cost(batch, problem.cost);
  const auto est = picekit::estimate(batch, costs);
  REQUIRE(est.log_psi_hat == 0.0);
  REQUIRE(est.j_hat == 0.0);
  REQUIRE(est.ess == Approx(1.0).margin(1e-12));
}

TEST_CASE("uniform weights leave only a mean-zero control correction", "[estimator]") {
  const double nu = 0.5;
  const auto problem = costless_problem(nu, 0.4, 0.01);
  const ZeroPolicy uncontrolled(1);
  const std::int64_t n = 10000;
  const auto batch =
      picekit::rollout(problem.model, uncontrolled, problem.init, problem.grid, n, 8);
  const auto costs = picekit::path_cost(batch, problem.cost);
  const auto summary = picekit::weights(costs);
  const Vector u_star = picekit::estimate_u_star(batch, summary, 1);

  const double eps = problem.grid.dt;
  // correction = mean of W(eps)/eps; W(eps) ~ N(0, nu eps).
  const double bound = 4.0 * std::sqrt(nu * eps) / std::sqrt(static_cast<double>(n)) / eps;
  REQUIRE(std::abs(u_star(0)) < bound);
}

TEST_CASE("entropic sample size hand values", "[estimator]") {
  REQUIRE(picekit::entropic_ess(Vector::Constant(10, 0.1)) == Approx(1.0).margin(1e-12));

  Vector degenerate = Vector::Zero(8);
  degenerate(3) = 1.0;
  REQUIRE(picekit::entropic_ess(degenerate) == 0.0);

  Vector half = Vector::Zero(4);
  half(0) = 0.5;
  half(1) = 0.5;
  REQUIRE(picekit::entropic_ess(half) == Approx(0.5).margin(1e-12));
}

TEST_CASE("optimal control estimate from uncontrolled sampling", "[estimator]") {
  picekit::LqgSpec spec;
  spec.horizon = 0.3;  // short horizon keeps the proposal overlap healthy
  spec.x0 = 2.0;
  const auto problem = picekit::build_lqg(spec);
  const ZeroPolicy uncontrolled(1);
  const auto batch =
      picekit::rollout(problem.model, uncontrolled, problem.init, problem.grid, 100000, 42);
  const auto costs = picekit::path_cost(batch, problem.cost);
  const auto summary = picekit::weights(costs);
  const Vector u_star = picekit::estimate_u_star(batch, summary, 1);

  const double expected = -picekit::lqg_analytic_gain(spec.q, spec.r, spec.horizon, 0.0) *
                          spec.x0 / spec.r;
  REQUIRE(u_star(0) == Approx(expected).epsilon(0.15));
}

TEST_CASE("sampling with the optimal control needs no correction", "[estimator]") {
  picekit::LqgSpec spec;
  spec.horizon = 1.0;
  spec.x0 = 2.0;
  const auto problem = picekit::build_lqg(spec);
  const auto policy = picekit::lqg_analytic_policy(spec);
  const auto batch =
      picekit::rollout(problem.model, policy, problem.init, problem.grid, 10000, 43);
  const auto costs = picekit::path_cost(batch, problem.cost);
  const auto summary = picekit::weights(costs);
  const Vector u_star = picekit::estimate_u_star(batch, summary, 1);

  const double expected = -picekit::lqg_analytic_gain(spec.q, spec.r, spec.horizon, 0.0) *
                          spec.x0 / spec.r;
  REQUIRE(u_star(0) == Approx(expected).epsilon(0.05));
}

TEST_CASE("optimal control estimate converges at the Monte Carlo rate", "[estimator]") {
  picekit::LqgSpec spec;
  spec.horizon = 0.3;
  spec.x0 = 2.0;
  const auto problem = picekit::build_lqg(spec);
  const ZeroPolicy uncontrolled(1);
  const double expected = -picekit::lqg_analytic_gain(spec.q, spec.r, spec.horizon, 0.0) *
                          spec.x0 / spec.r;

  const std::vector<std::int64_t> sizes = {1000, 10000, 100000};
  const int repeats = 24;
  std::vector<double> log_rmse;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    double mse = 0.0;
    for (int rep = 0; rep < repeats; ++rep) {
      const auto batch =
          picekit::rollout(problem.model, uncontrolled, problem.init, problem.grid, sizes[k],
                           1000 + static_cast<std::uint64_t>(rep) * 7 + k);
      const auto summary = picekit::weights(picekit::path_cost(batch, problem.cost));
      const double err = picekit::estimate_u_star(batch, summary, 1)(0) - expected;
      mse += err * err;
    }
    log_rmse.push_back(0.5 * std::log10(mse / repeats));
  }

  // Least squares slope of log rmse against log N.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const double x = std::log10(static_cast<double>(sizes[k]));
    sx += x;
    sy += log_rmse[k];
    sxx += x * x;
    sxy += x * log_rmse[k];
  }
  const double n = static_cast<double>(sizes.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  REQUIRE(slope > -0.7);
  REQUIRE(slope < -0.3);
}

TEST_CASE("cost-to-go estimate matches the analytic value", "[estimator]") {
  picekit::LqgSpec spec;  // x0 = 2, T = 5
  spec.dt = 5e-4;         // fine grid so discretization bias sits inside 3 se
  const auto problem = picekit::build_lqg(spec);
  const auto sampling = picekit::lqg_analytic_policy(spec, 0.75);
  const auto costs = picekit::rollout_costs(problem.model, sampling, problem.init, problem.grid,
                                            10000, 12, problem.cost);
  const auto psi = picekit::estimate_psi(costs);
  const double lambda = problem.cost.temperature;
  const double j_hat = -lambda * psi.log_psi_hat;
  const double expected = analytic_j(spec, 0.0, spec.x0);
  REQUIRE(std::abs(j_hat - expected) < 3.0 * lambda * psi.stderr_log_psi);
}

TEST_CASE("normalizer estimates agree across proposals within stderr", "[estimator]") {
  picekit::LqgSpec spec;
  spec.horizon = 1.0;
  spec.x0 = 0.5;
  const auto problem = picekit::build_lqg(spec);
  const ZeroPolicy uncontrolled(1);
  const auto half = picekit::lqg_analytic_policy(spec, 0.5);

  const auto c0 = picekit::rollout_costs(problem.model, uncontrolled, problem.init,
                                         problem.grid, 10000, 7, problem.cost);
  const auto c1 = picekit::rollout_costs(problem.model, half, problem.init, problem.grid, 10000,
                                         8, problem.cost);
  const auto a = picekit::estimate_psi(c0);
  const auto b = picekit::estimate_psi(c1);
  const double combined =
      std::sqrt(a.stderr_log_psi * a.stderr_log_psi + b.stderr_log_psi * b.stderr_log_psi);
  REQUIRE(std::abs(a.log_psi_hat - b.log_psi_hat) < 3.0 * combined);
}

TEST_CASE("cost-to-go estimates sit above the analytic value on average", "[estimator]") {
  // psi_hat is unbiased, so J_hat = -lambda log psi_hat is biased upward;
  // the mean over seeds must not undershoot J by more than the stderr band.
  picekit::LqgSpec spec;
  spec.horizon = 1.0;
  spec.x0 = 0.5;
  const auto problem = picekit::build_lqg(spec);
  const double lambda = problem.cost.temperature;
  const double expected = analytic_j(spec, 0.0, spec.x0);

  const ZeroPolicy uncontrolled(1);
  const auto scaled = picekit::lqg_analytic_policy(spec, 0.5);
  const picekit::Policy* proposals[] = {&uncontrolled, &scaled};
  for (const picekit::Policy* sampling : proposals) {
    std::vector<double> j_hats;
    for (int seed = 0; seed < 20; ++seed) {
      const auto costs =
          picekit::rollout_costs(problem.model, *sampling, problem.init, problem.grid, 10000,
                                 500 + static_cast<std::uint64_t>(seed), problem.cost);
      j_hats.push_back(-lambda * picekit::estimate_psi(costs).log_psi_hat);
    }
    const auto stats = oracles::sample_stats(j_hats);
    REQUIRE(stats.mean >= expected - 3.0 * stats.stderr_mean);
  }
}

TEST_CASE("residuals against the analytic normalizer", "[estimator]") {
  picekit::LqgSpec spec;
  spec.horizon = 1.0;
  spec.x0 = 0.5;
  spec.dt = 1e-3;
  const auto problem = picekit::build_lqg(spec);
  const double psi_ref = std::exp(-analytic_j(spec, 0.0, spec.x0) / problem.cost.temperature);

  SECTION("optimal sampling gives nearly constant exponential weights") {
    const auto policy = picekit::lqg_analytic_policy(spec);
    const auto costs = picekit::rollout_costs(problem.model, policy, problem.init, problem.grid,
                                              2000, 3, problem.cost);
    const auto stats = picekit::residual_vs_reference(costs, psi_ref);
    REQUIRE(stats.variance < 1e-3);

    picekit::LqgSpec fine = spec;
    fine.dt = 2.5e-4;
    const auto fine_problem = picekit::build_lqg(fine);
    const auto fine_costs = picekit::rollout_costs(fine_problem.model, policy, fine_problem.init,
                                                   fine_problem.grid, 2000, 3, fine_problem.cost);
    REQUIRE(picekit::residual_vs_reference(fine_costs, psi_ref).variance < stats.variance);
  }

  SECTION("uncontrolled sampling is unbiased for the normalizer") {
    picekit::LqgSpec coarse = spec;
    coarse.dt = 2e-3;
    const auto p = picekit::build_lqg(coarse);
    const ZeroPolicy uncontrolled(1);
    const auto costs = picekit::rollout_costs(p.model, uncontrolled, p.init, p.grid, 10000, 22,
                                              p.cost);
    const auto stats = picekit::residual_vs_reference(costs, psi_ref);
    REQUIRE(std::abs(stats.mean) < 3.0 * stats.stderr_mean);
  }

  SECTION("a costless problem has exactly zero residual") {
    const auto p = costless_problem(1.0, 0.5, 0.05);
    const ZeroPolicy uncontrolled(1);
    const auto costs = picekit::rollout_costs(p.model, uncontrolled, p.init, p.grid, 50, 2,
                                              p.cost);
    const auto stats = picekit::residual_vs_reference(costs, 1.0);
    REQUIRE(stats.mean == 0.0);
    REQUIRE(stats.variance == 0.0);
  }
}

TEST_CASE("estimates need at least two finite-cost trajectories", "[estimator]") {
  picekit::CostSet costs;
  costs.temperature = 1.0;
  costs.per_path.resize(3);
  costs.per_path[0].total = 1.0;
  costs.per_path[1].total = std::numeric_limits<double>::infinity();
  costs.per_path[1].is_finite = false;
  costs.per_path[2].total = std::numeric_limits<double>::infinity();
  costs.per_path[2].is_finite = false;
  costs.flagged = 2;
  REQUIRE_THROWS_AS(picekit::estimate_psi(costs), picekit::EstimationError);
}

TEST_CASE("optimal control estimation requires a fixed start", "[estimator]") {
  picekit::PendulumSpec spec;
  const auto problem = picekit::build_pendulum(spec);
  const ZeroPolicy uncontrolled(1);
  const auto batch =
      picekit::rollout(problem.model, uncontrolled, problem.init, problem.grid, 16, 4);
  const auto summary = picekit::weights(picekit::path_cost(batch, problem.cost));
  REQUIRE_THROWS_AS(picekit::estimate_u_star(batch, summary, 1), picekit::ConfigError);
}

TEST_CASE("eps window must stay within the grid", "[estimator]") {
  const auto problem = costless_problem(1.0, 0.5, 0.05);
  const ZeroPolicy uncontrolled(1);
  const auto batch =
      picekit::rollout(problem.model, uncontrolled, problem.init, problem.grid, 8, 4);
  const auto summary = picekit::weights(picekit::path_cost(batch, problem.cost));
  REQUIRE_THROWS_AS(picekit::estimate_u_star(batch, summary, 0), picekit::ConfigError);
  REQUIRE_THROWS_AS(picekit::estimate_u_star(batch, summary, problem.grid.steps + 1),
                    picekit::ConfigError);
  REQUIRE_NOTHROW(picekit::estimate_u_star(batch, summary, problem.grid.steps));
}
