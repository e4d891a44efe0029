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

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <utility>
#include <vector>

#include "picekit/errors.hpp"
#include "picekit/policy.hpp"
#include "picekit/problem.hpp"
#include "picekit/rng.hpp"
#include "picekit/simulate.hpp"

namespace picekit {

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-9) {
  struct Rec {
    static double go(const std::function<double(double)>& f, double a, double b, double fa,
                     double fb, double fm, double whole, double tol, int depth) {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m);
      const double rm = 0.5 * (m + b);
      const double flm = f(lm);
      const double frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double delta = left + right - whole;
      if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
      }
      return go(f, a, m, fa, fm, flm, left, 0.5 * tol, depth - 1) +
             go(f, m, b, fm, fb, frm, right, 0.5 * tol, depth - 1);
    }
  };
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return Rec::go(f, a, b, fa, fb, fm, whole, tol, 48);
}

// ---------------------------------------------------------------------------
// Scalar linear-quadratic problem: dX = u ds + dW, cost (Q x^2 + R u^2) / 2.
// ---------------------------------------------------------------------------

struct LqgSpec {
  double q = 2.0;
  double r = 1.0;
  double nu = 0.1;
  double horizon = 5.0;
  double x0 = 2.0;
  double dt = 0.01;
  std::int64_t samples = 50;
  double eta = 0.1;

  void validate() const {
    if (!(q > 0.0 && r > 0.0 && nu > 0.0 && horizon > 0.0 && dt > 0.0)) {
      throw ConfigError("lqg: Q, R, nu, T and dt must be positive");
    }
  }

  TimeGrid grid() const {
    return TimeGrid(0.0, dt, static_cast<std::int64_t>(std::llround(horizon / dt)));
  }
};

/// Riccati solution of the scalar problem:
///   P(s) = sqrt(Q R) tanh(sqrt(Q / R) (T - s)),
/// with the optimal feedback u*(s, x) = -P(s) x / R.
inline double lqg_analytic_gain(double q, double r, double horizon, double s) {
  return std::sqrt(q * r) * std::tanh(std::sqrt(q / r) * (horizon - s));
}

/// Optimal cost-to-go J(t, x) = P(t) x^2 / 2 + (nu / 2) int_t^T P(s) ds; the
/// integral is evaluated by adaptive quadrature.
inline double lqg_analytic_value(double q, double r, double nu, double horizon, double t,
                                 double x) {
  const double quad = adaptive_simpson(
      [&](double s) { return lqg_analytic_gain(q, r, horizon, s); }, t, horizon, 1e-10);
  return 0.5 * lqg_analytic_gain(q, r, horizon, t) * x * x + 0.5 * nu * quad;
}

inline ControlProblem build_lqg(const LqgSpec& spec) {
  spec.validate();
  ControlProblem problem;
  problem.model = make_model(
      1, 1, [](double, const Vector& x) { return Vector::Zero(x.size()); },
      [](double, const Vector&) { return Matrix::Identity(1, 1); },
      Matrix::Constant(1, 1, spec.nu));
  problem.cost = CostSpec::quadratic_state(Matrix::Constant(1, 1, spec.q),
                                           Matrix::Constant(1, 1, spec.r), spec.r * spec.nu);
  problem.grid = spec.grid();
  problem.init = InitialState::fixed(Vector::Constant(1, spec.x0));
  return problem;
}

/// Feedback basis {1, x} used by the learned scalar controllers.
inline std::vector<BasisFn> lqg_basis() {
  return {[](const Vector&) { return 1.0; }, [](const Vector& x) { return x(0); }};
}

/// The analytic optimal controller scaled by `factor` (1 = optimal).
inline FunctionPolicy lqg_analytic_policy(const LqgSpec& spec, double factor = 1.0) {
  const double q = spec.q, r = spec.r, horizon = spec.horizon;
  return FunctionPolicy(
      1,
      [q, r, horizon, factor](double t, const Vector& x, Vector& u) {
        u(0) = -factor * lqg_analytic_gain(q, r, horizon, t) * x(0) / r;
      },
      "lqg_analytic");
}

// ---------------------------------------------------------------------------
// Inverted pendulum swing-up: ddot alpha = -cos alpha + u.
// ---------------------------------------------------------------------------

struct PendulumSpec {
  double q1 = 2.0;
  double q2 = 0.02;
  double r = 1.0;
  double nu = 0.3;
  double horizon = 5.0;
  double dt = 0.1;
  std::int64_t samples = 500;
  double eta = 0.4;
  int bins_angle = 20;      // K1 over [0, 2 pi), periodic
  int bins_velocity = 40;   // K2 over [velocity_min, velocity_max], clamped
  double velocity_min = -2.0;
  double velocity_max = 2.0;
  double jitter = 0.02;     // uniform half-width on the initial velocity

  void validate() const {
    if (!(q1 > 0.0 && q2 > 0.0 && r > 0.0 && nu > 0.0 && horizon > 0.0 && dt > 0.0)) {
      throw ConfigError("pendulum: costs, nu, T and dt must be positive");
    }
    if (bins_angle < 1 || bins_velocity < 1) {
      throw ConfigError("pendulum: grid bin counts must be at least 1");
    }
    if (!(velocity_max > velocity_min)) {
      throw ConfigError("pendulum: velocity box is empty");
    }
  }

  TimeGrid grid() const {
    return TimeGrid(0.0, dt, static_cast<std::int64_t>(std::llround(horizon / dt)));
  }
};

/// Assembles the swing-up problem. State is (angle, angular velocity); the
/// target is the upright position sin x1 = 1 at rest. Rollouts start pointing
/// down, x1 = 3 pi / 2 with a small uniform jitter on the velocity.
inline ControlProblem build_pendulum(const PendulumSpec& spec) {
  spec.validate();
  ControlProblem problem;
  problem.model = make_model(
      2, 1,
      [](double, const Vector& x) {
        Vector f(2);
        f(0) = x(1);
        f(1) = -std::cos(x(0));
        return f;
      },
      [](double, const Vector&) {
        Matrix g(2, 1);
        g(0, 0) = 0.0;
        g(1, 0) = 1.0;
        return g;
      },
      Matrix::Constant(1, 1, spec.nu));

  const double q1 = spec.q1, q2 = spec.q2;
  problem.cost.state_cost = [q1, q2](double, const Vector& x) {
    const double lift = std::sin(x(0)) - 1.0;
    return 0.5 * q1 * lift * lift + 0.5 * q2 * x(1) * x(1);
  };
  problem.cost.terminal_cost = [](const Vector&) { return 0.0; };
  problem.cost.control_weight = Matrix::Constant(1, 1, spec.r);
  problem.cost.temperature = spec.r * spec.nu;
  problem.grid = spec.grid();

  const double jitter = spec.jitter;
  problem.init = InitialState::sampled(2, [jitter](CounterStream& stream, Vector& x) {
    x(0) = 3.0 * std::numbers::pi / 2.0;
    x(1) = jitter > 0.0 ? stream.next_uniform(-jitter, jitter) : 0.0;
  });
  return problem;
}

/// Zero-initialized grid controller over the pendulum's state box. The angle
/// axis wraps with period 2 pi before binning.
inline TabularGridPolicy make_pendulum_policy(const PendulumSpec& spec) {
  std::vector<GridAxis> axes(2);
  axes[0] = {0.0, 2.0 * std::numbers::pi, spec.bins_angle, true};
  axes[1] = {spec.velocity_min, spec.velocity_max, spec.bins_velocity, false};
  return TabularGridPolicy(1, std::move(axes));
}

// ---------------------------------------------------------------------------
// Two-unit firing-rate network observed through one noisy coordinate.
// ---------------------------------------------------------------------------

struct Observation {
  double time = 0.0;
  double value = 0.0;
};

struct NeuralNetSpec {
  Matrix coupling;          // antisymmetric 2 x 2
  Vector bias;              // 2
  double sigma_dyn_sq = 0.2;  // dynamics noise variance per coordinate
  double sigma_obs = 0.2;     // observation noise standard deviation
  int observed_coord = 0;
  std::vector<Observation> observations;
  double horizon = 1.0;
  double dt = 0.01;

  void validate() const {
    if (coupling.rows() != 2 || coupling.cols() != 2 || bias.size() != 2) {
      throw ConfigError("neural net: coupling must be 2x2 and bias length 2");
    }
    if (!(coupling + coupling.transpose()).isZero(1e-12)) {
      throw ConfigError("neural net: coupling matrix must be antisymmetric");
    }
    if (!(sigma_dyn_sq > 0.0 && sigma_obs > 0.0)) {
      throw ConfigError("neural net: noise scales must be positive");
    }
    if (!(horizon > 0.0 && dt > 0.0)) {
      throw ConfigError("neural net: horizon and dt must be positive");
    }
  }

  TimeGrid grid() const {
    return TimeGrid(0.0, dt, static_cast<std::int64_t>(std::llround(horizon / dt)));
  }
};

/// Draws the random network: antisymmetric coupling with N(0, coupling_std^2)
/// off-diagonal entries and N(0, bias_std^2) biases.
inline NeuralNetSpec make_neural_net_spec(std::uint64_t model_seed, double coupling_std = 25.0,
                                          double bias_std = 0.75) {
  CounterStream stream(model_seed, 0);
  NeuralNetSpec spec;
  const double a = coupling_std * stream.next_normal();
  spec.coupling = Matrix::Zero(2, 2);
  spec.coupling(0, 1) = a;
  spec.coupling(1, 0) = -a;
  spec.bias = Vector(2);
  spec.bias(0) = bias_std * stream.next_normal();
  spec.bias(1) = bias_std * stream.next_normal();
  return spec;
}

namespace detail {

inline DynamicsModel neural_net_dynamics(const NeuralNetSpec& spec, bool linearized) {
  const Matrix coupling = spec.coupling;
  const Vector bias = spec.bias;
  DynamicsModel model;
  model.state_dim = 2;
  model.control_dim = 2;
  if (linearized) {
    // tanh replaced by identity; with zero coupling this is an OU process.
    model.drift = [coupling, bias](double, const Vector& x, Vector& out) {
      out.noalias() = coupling * x;
      out += bias - x;
    };
  } else {
    model.drift = [coupling, bias](double, const Vector& x, Vector& out) {
      out.noalias() = coupling * x;
      out += bias;
      out = out.array().tanh().matrix() - x;
    };
  }
  model.control_gain = [](double, const Vector&, Matrix& out) {
    out = Matrix::Identity(2, 2);
  };
  model.noise_covariance = spec.sigma_dyn_sq * Matrix::Identity(2, 2);
  return model;
}

}  // namespace detail

/// Simulates one ground-truth run of the network (no control, initial state
/// from the N(0, sigma_dyn_sq I) prior) and reads off noisy observations of the
/// observed coordinate at the requested times.
inline std::vector<Observation> simulate_observations(const NeuralNetSpec& spec,
                                                      const std::vector<double>& times,
                                                      std::uint64_t truth_seed) {
  spec.validate();
  const TimeGrid grid = spec.grid();
  const DynamicsModel model = detail::neural_net_dynamics(spec, false);
  const double sd = std::sqrt(spec.sigma_dyn_sq);
  const InitialState init = InitialState::sampled(2, [sd](CounterStream& s, Vector& x) {
    x(0) = sd * s.next_normal();
    x(1) = sd * s.next_normal();
  });
  const ZeroPolicy uncontrolled(2);
  const TrajectoryBatch truth = rollout(model, uncontrolled, init, grid, 1, truth_seed);

  CounterStream obs_stream(truth_seed, 0xFEEDu);
  std::vector<Observation> out;
  out.reserve(times.size());
  for (double t : times) {
    const std::int64_t node = grid.nearest_node(t);
    Observation obs;
    obs.time = grid.time(node);
    obs.value = truth.state(0, node)(spec.observed_coord) + spec.sigma_obs * obs_stream.next_normal();
    out.push_back(obs);
  }
  return out;
}

/// Equally spaced interior observation times, t_i = i T / (count + 1).
inline std::vector<double> default_observation_times(double horizon, int count) {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    times.push_back(horizon * static_cast<double>(i) / static_cast<double>(count + 1));
  }
  return times;
}

/// Assembles the latent-state inference problem. Observation log-likelihoods
/// enter the running cost as point masses of weight 1/dt at the nearest grid
/// node, so each path cost S carries exactly
///   sum_i (y_i - x_c(t_i))^2 / (2 sigma_obs^2)
/// on top of the Girsanov control terms, and exp(-S) weighting targets the
/// posterior over paths. `linearized` swaps tanh for the identity, which makes
/// the problem exactly linear-Gaussian (a test oracle hook).
inline ControlProblem build_neural_net(const NeuralNetSpec& spec, bool linearized = false) {
  spec.validate();
  ControlProblem problem;
  problem.model = detail::neural_net_dynamics(spec, linearized);
  problem.grid = spec.grid();

  const double lambda = spec.sigma_dyn_sq;  // R = I, nu = sigma_dyn_sq I
  // Observation penalties keyed by grid node; V is scaled by lambda so the
  // 1/lambda inside S cancels and the likelihood enters S in natural units.
  std::vector<std::vector<Observation>> per_node(static_cast<std::size_t>(problem.grid.steps));
  for (const Observation& obs : spec.observations) {
    std::int64_t node = problem.grid.nearest_node(obs.time);
    if (node >= problem.grid.steps) node = problem.grid.steps - 1;
    per_node[static_cast<std::size_t>(node)].push_back(obs);
  }
  const double gain = lambda / (problem.grid.dt * spec.sigma_obs * spec.sigma_obs);
  const int coord = spec.observed_coord;
  const TimeGrid grid = problem.grid;
  problem.cost.state_cost = [per_node = std::move(per_node), gain, coord,
                             grid](double t, const Vector& x) {
    const std::int64_t node = grid.nearest_node(t);
    if (node >= grid.steps) return 0.0;
    double cost = 0.0;
    for (const Observation& obs : per_node[static_cast<std::size_t>(node)]) {
      const double miss = obs.value - x(coord);
      cost += 0.5 * gain * miss * miss;
    }
    return cost;
  };
  problem.cost.terminal_cost = [](const Vector&) { return 0.0; };
  problem.cost.control_weight = Matrix::Identity(2, 2);
  problem.cost.temperature = lambda;

  const double sd = std::sqrt(spec.sigma_dyn_sq);
  problem.init = InitialState::sampled(2, [sd](CounterStream& s, Vector& x) {
    x(0) = sd * s.next_normal();
    x(1) = sd * s.next_normal();
  });
  return problem;
}

}  // namespace picekit
