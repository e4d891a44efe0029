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
#include <numbers>
#include <vector>

#include "picekit/benchmarks.hpp"
#include "picekit/estimators.hpp"
#include "picekit/simulate.hpp"
#include "support/oracles.hpp"

using picekit::Matrix;
using picekit::Vector;

TEST_CASE("feedback gain vanishes at the horizon", "[benchmark]") {
  REQUIRE(picekit::lqg_analytic_gain(2.0, 1.0, 5.0, 5.0) == 0.0);
}

TEST_CASE("long horizons approach the stationary gain", "[benchmark]") {
  const double p = picekit::lqg_analytic_gain(2.0, 1.0, 100.0, 0.0);
  REQUIRE(p == Approx(std::sqrt(2.0)).margin(1e-10));
  REQUIRE(-p / 1.0 == Approx(-1.414).margin(1e-3));
}

TEST_CASE("the closed-form gain satisfies its Riccati equation", "[benchmark]") {
  // -dP/ds = Q - P^2 / R, checked by central differences of the closed form.
  const double q = 2.0, r = 1.0, horizon = 5.0;
  const double h = 1e-5;
  for (const double s : {0.0, 0.7, 2.3, 4.2, 4.9}) {
    const double lhs = -(picekit::lqg_analytic_gain(q, r, horizon, s + h) -
                         picekit::lqg_analytic_gain(q, r, horizon, s - h)) /
                       (2.0 * h);
    const double p = picekit::lqg_analytic_gain(q, r, horizon, s);
    REQUIRE(lhs == Approx(q - p * p / r).margin(1e-8));
  }
}

TEST_CASE("cost-to-go value terms", "[benchmark]") {
  const double q = 2.0, r = 1.0, nu = 0.1, horizon = 5.0;
  // At the horizon there is no remaining cost.
  REQUIRE(picekit::lqg_analytic_value(q, r, nu, horizon, horizon, 3.0) == 0.0);
  // Without noise only the quadratic term survives.
  const double t = 1.2, x = 0.8;
  REQUIRE(picekit::lqg_analytic_value(q, r, 0.0, horizon, t, x) ==
          Approx(0.5 * picekit::lqg_analytic_gain(q, r, horizon, t) * x * x).margin(1e-12));
  // The quadrature agrees with the independent closed form of the integral.
  const double value = picekit::lqg_analytic_value(q, r, nu, horizon, t, x);
  const double expected = 0.5 * picekit::lqg_analytic_gain(q, r, horizon, t) * x * x +
                          0.5 * nu * oracles::lqg_gain_integral(q, r, horizon, t);
  REQUIRE(value == Approx(expected).margin(1e-8));
}

TEST_CASE("analytic value agrees with a Monte Carlo estimate", "[benchmark]") {
  picekit::LqgSpec spec;
  spec.horizon = 1.0;
  spec.x0 = 1.0;
  spec.dt = 5e-4;
  const auto problem = picekit::build_lqg(spec);
  const auto sampling = picekit::lqg_analytic_policy(spec, 0.7);
  const auto costs = picekit::rollout_costs(problem.model, sampling, problem.init, problem.grid,
                                            10000, 33, problem.cost);
  const auto psi = picekit::estimate_psi(costs);
  const double lambda = problem.cost.temperature;
  const double j_hat = -lambda * psi.log_psi_hat;
  const double expected =
      picekit::lqg_analytic_value(spec.q, spec.r, spec.nu, spec.horizon, 0.0, spec.x0);
  REQUIRE(std::abs(j_hat - expected) < 3.0 * lambda * psi.stderr_log_psi);
}

TEST_CASE("pendulum drift has the upright equilibrium", "[benchmark]") {
  picekit::PendulumSpec spec;
  const auto problem = picekit::build_pendulum(spec);
  Vector f(2);
  problem.model.drift(0.0, (Vector(2) << std::numbers::pi / 2.0, 0.0).finished(), f);
  REQUIRE(f(0) == 0.0);
  REQUIRE(f(1) == Approx(0.0).margin(1e-15));
}

TEST_CASE("pendulum state cost is minimal exactly at the target", "[benchmark]") {
  picekit::PendulumSpec spec;
  const auto problem = picekit::build_pendulum(spec);
  const Vector target = (Vector(2) << std::numbers::pi / 2.0, 0.0).finished();
  REQUIRE(problem.cost.state_cost(0.0, target) == Approx(0.0).margin(1e-15));

  for (double x1 = 0.05; x1 < 2.0 * std::numbers::pi; x1 += 0.37) {
    for (double x2 = -2.0; x2 <= 2.0; x2 += 0.5) {
      const Vector x = (Vector(2) << x1, x2).finished();
      if ((x - target).norm() < 1e-9) continue;
      REQUIRE(problem.cost.state_cost(0.0, x) > 0.0);
    }
  }
}

TEST_CASE("pendulum initial sampler jitters only the velocity", "[benchmark]") {
  picekit::PendulumSpec spec;
  const auto problem = picekit::build_pendulum(spec);
  const picekit::ZeroPolicy uncontrolled(1);
  const auto batch =
      picekit::rollout(problem.model, uncontrolled, problem.init, problem.grid, 200, 7);
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    REQUIRE(batch.state(i, 0)(0) == 3.0 * std::numbers::pi / 2.0);
    REQUIRE(std::abs(batch.state(i, 0)(1)) <= spec.jitter);
  }
  // Jitter actually varies across trajectories.
  REQUIRE(batch.state(0, 0)(1) != batch.state(1, 0)(1));
}

TEST_CASE("network coupling is antisymmetric by construction", "[benchmark]") {
  const auto spec = picekit::make_neural_net_spec(123);
  REQUIRE((spec.coupling + spec.coupling.transpose()).isZero(1e-15));
  REQUIRE(spec.coupling(0, 1) != 0.0);
}

TEST_CASE("decoupled unbiased network relaxes to the OU stationary variance", "[benchmark]") {
  auto spec = picekit::make_neural_net_spec(1, 0.0, 0.0);  // J = 0, bias = 0
  spec.horizon = 10.0;
  spec.dt = 0.01;
  const auto problem = picekit::build_neural_net(spec);
  const picekit::ZeroPolicy uncontrolled(2);
  const auto batch =
      picekit::rollout(problem.model, uncontrolled, problem.init, problem.grid, 2000, 77);

  double second_moment = 0.0;
  std::int64_t samples = 0;
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    for (std::int64_t j = problem.grid.steps / 2; j <= problem.grid.steps; j += 10) {
      second_moment += batch.state(i, j).squaredNorm();
      samples += 2;
    }
  }
  second_moment /= static_cast<double>(samples);
  REQUIRE(second_moment == Approx(spec.sigma_dyn_sq / 2.0).epsilon(0.05));
}

TEST_CASE("observations hitting the path exactly cost nothing", "[benchmark]") {
  auto spec = picekit::make_neural_net_spec(5);
  spec.observations = {{0.48, 0.6}};
  const auto problem = picekit::build_neural_net(spec);

  const auto node = problem.grid.nearest_node(0.48);
  Vector on_target = (Vector(2) << 0.6, -1.0).finished();
  REQUIRE(problem.cost.state_cost(problem.grid.time(node), on_target) == 0.0);
  Vector off_target = (Vector(2) << 0.7, -1.0).finished();
  REQUIRE(problem.cost.state_cost(problem.grid.time(node), off_target) > 0.0);
  // Other nodes carry no observation penalty.
  REQUIRE(problem.cost.state_cost(problem.grid.time(node + 3), off_target) == 0.0);
}

TEST_CASE("observation penalties land in the path cost in likelihood units", "[benchmark]") {
  auto spec = picekit::make_neural_net_spec(5, 0.0, 0.0);
  spec.horizon = 0.2;
  spec.dt = 0.1;
  const double y = 1.3;
  spec.observations = {{0.1, y}};
  const auto problem = picekit::build_neural_net(spec);
  const picekit::ZeroPolicy uncontrolled(2);
  const auto batch =
      picekit::rollout(problem.model, uncontrolled, problem.init, problem.grid, 4, 3);
  const auto costs = picekit::path_cost(batch, problem.cost);

  for (std::int64_t i = 0; i < batch.count(); ++i) {
    const double miss = y - batch.state(i, 1)(0);
    const double expected = 0.5 * miss * miss / (spec.sigma_obs * spec.sigma_obs);
    REQUIRE(costs.per_path[static_cast<std::size_t>(i)].total ==
            Approx(expected).margin(1e-12));
  }
}

TEST_CASE("simulated observations are reproducible and on the grid", "[benchmark]") {
  auto spec = picekit::make_neural_net_spec(9);
  const auto times = picekit::default_observation_times(spec.horizon, 12);
  REQUIRE(times.size() == 12);
  REQUIRE(times.front() > 0.0);
  REQUIRE(times.back() < spec.horizon);

  const auto a = picekit::simulate_observations(spec, times, 4);
  const auto b = picekit::simulate_observations(spec, times, 4);
  REQUIRE(a.size() == 12);
  for (std::size_t k = 0; k < a.size(); ++k) {
    REQUIRE(a[k].time == b[k].time);
    REQUIRE(a[k].value == b[k].value);
    REQUIRE(a[k].time == Approx(spec.grid().time(spec.grid().nearest_node(a[k].time))));
  }
}

TEST_CASE("adaptive quadrature integrates smooth functions tightly", "[benchmark]") {
  const double cubic = picekit::adaptive_simpson([](double x) { return x * x * x; }, 0.0, 1.0);
  REQUIRE(cubic == Approx(0.25).margin(1e-12));
  const double bump =
      picekit::adaptive_simpson([](double x) { return std::exp(-x * x); }, -3.0, 3.0, 1e-10);
  REQUIRE(bump == Approx(std::sqrt(std::numbers::pi) * std::erf(3.0)).margin(1e-8));
}
