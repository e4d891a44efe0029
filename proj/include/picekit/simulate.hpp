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

#include <algorithm>
#include <cstdint>
#include <exception>
#include <memory>
#include <thread>
#include <utility>
#include <vector>

#include "picekit/cost.hpp"
#include "picekit/dynamics.hpp"
#include "picekit/errors.hpp"
#include "picekit/policy.hpp"
#include "picekit/rng.hpp"
#include "picekit/trajectory.hpp"

namespace picekit {

struct RolloutOptions {
  /// Abort the batch when any state component leaves [-bound, bound]; keeps
  /// exp(-S) from overflowing downstream.
  double divergence_bound = 1e6;
  /// Worker threads for trajectory simulation; 0 means hardware concurrency.
  /// Results are identical for every worker count.
  int workers = 0;
};

namespace detail {

inline int resolve_workers(int requested, std::int64_t count) {
  int workers = requested;
  if (workers <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    workers = hw == 0 ? 1 : static_cast<int>(hw);
  }
  return static_cast<int>(std::min<std::int64_t>(workers, std::max<std::int64_t>(count, 1)));
}

/// Runs fn(i) for i in [0, count) across `workers` threads in contiguous
/// chunks. When several trajectories fail, the error with the smallest index
/// is rethrown so the outcome does not depend on scheduling.
template <class Fn>
void parallel_trajectories(std::int64_t count, int workers, Fn&& fn) {
  if (workers <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }

  struct Failure {
    std::int64_t index;
    std::exception_ptr error;
  };
  std::vector<Failure> failures(static_cast<std::size_t>(workers), Failure{-1, nullptr});
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));

  const std::int64_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t begin = static_cast<std::int64_t>(w) * chunk;
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, count);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      for (std::int64_t i = begin; i < end; ++i) {
        try {
          fn(i);
        } catch (...) {
          failures[static_cast<std::size_t>(w)] = {i, std::current_exception()};
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();

  const Failure* first = nullptr;
  for (const Failure& f : failures) {
    if (f.error && (first == nullptr || f.index < first->index)) first = &f;
  }
  if (first) std::rethrow_exception(first->error);
}

inline void check_rollout_inputs(const DynamicsModel& model, const Policy& policy,
                                 const InitialState& init, std::int64_t count) {
  if (count < 1) throw ConfigError("rollout: trajectory count must be at least 1");
  if (model.state_dim < 1 || model.control_dim < 1) {
    throw ConfigError("rollout: model dimensions must be positive");
  }
  if (policy.control_dim() != model.control_dim) {
    throw ConfigError("rollout: policy control dimension does not match the model");
  }
  if (init.dim() != model.state_dim) {
    throw ConfigError("rollout: initial state dimension does not match the model");
  }
}

}  // namespace detail

/// Simulates N trajectories of the controlled diffusion under Euler-Maruyama
/// with the control evaluated at the left endpoint of each step:
///   X_{j+1} = X_j + f(s_j, X_j) dt + g(s_j, X_j) (u(s_j, X_j) dt + dW_j).
///
/// The Gaussian stream of trajectory i depends only on (seed, i), so the batch
/// is a pure function of (model, policy, init, grid, count, seed) regardless
/// of how many workers simulate it.
inline TrajectoryBatch rollout(const DynamicsModel& model, const Policy& policy,
                               const InitialState& init, const TimeGrid& grid,
                               std::int64_t count, std::uint64_t seed,
                               const RolloutOptions& options = {}) {
  detail::check_rollout_inputs(model, policy, init, count);
  const Matrix chol = model.noise_cholesky();
  const double sqrt_dt = std::sqrt(grid.dt);
  const int n = model.state_dim;
  const int m = model.control_dim;
  const double bound = options.divergence_bound;

  TrajectoryBatch batch(grid, n, m, count, seed, init);

  auto simulate_one = [&](std::int64_t i) {
    CounterStream stream(seed, static_cast<std::uint64_t>(i));
    Vector x(n), drift(n), u(m), z(m), dw(m), kick(m);
    Matrix gain(n, m);

    init.draw(stream, x);
    if (!x.allFinite()) {
      throw DivergenceError("rollout: non-finite initial state on trajectory " +
                                std::to_string(i),
                            i, 0);
    }
    batch.mutable_state(i, 0) = x;

    for (std::int64_t j = 0; j < grid.steps; ++j) {
      const double t = grid.time(j);
      model.drift(t, x, drift);
      model.control_gain(t, x, gain);
      policy.evaluate(t, x, u);
      if (!drift.allFinite() || !gain.allFinite() || !u.allFinite()) {
        throw DivergenceError("rollout: non-finite drift, gain or control on trajectory " +
                                  std::to_string(i) + " at step " + std::to_string(j),
                              i, j);
      }
      for (int k = 0; k < m; ++k) z(k) = stream.next_normal();
      dw.noalias() = sqrt_dt * (chol * z);

      batch.mutable_noise(i, j) = dw;
      batch.mutable_control(i, j) = u;

      kick = u * grid.dt + dw;
      x += drift * grid.dt;
      x.noalias() += gain * kick;

      if (!x.allFinite() || x.cwiseAbs().maxCoeff() > bound) {
        throw DivergenceError("rollout: trajectory " + std::to_string(i) +
                                  " diverged at step " + std::to_string(j + 1),
                              i, j + 1);
      }
      batch.mutable_state(i, j + 1) = x;
    }
  };

  detail::parallel_trajectories(count, detail::resolve_workers(options.workers, count),
                                simulate_one);
  return batch;
}

inline TrajectoryBatch rollout(const DynamicsModel& model, const Policy& policy, const Vector& x0,
                               const TimeGrid& grid, std::int64_t count, std::uint64_t seed,
                               const RolloutOptions& options = {}) {
  return rollout(model, policy, InitialState::fixed(x0), grid, count, seed, options);
}

/// Brownian increment sample with covariance nu * dt per step, laid out as a
/// count x steps x dim array. Stream i depends only on (seed, i); a rollout
/// from a fixed initial state consumes exactly this noise.
class NoiseArray {
 public:
  NoiseArray(TimeGrid grid, std::int64_t count, int dim)
      : grid_(grid),
        count_(count),
        dim_(dim),
        data_(static_cast<std::size_t>(count * grid.steps * dim)) {}

  const TimeGrid& grid() const { return grid_; }
  std::int64_t count() const { return count_; }
  int dim() const { return dim_; }

  ConstVectorView increment(std::int64_t i, std::int64_t j) const {
    return {data_.data() + (i * grid_.steps + j) * dim_, dim_};
  }
  VectorView mutable_increment(std::int64_t i, std::int64_t j) {
    return {data_.data() + (i * grid_.steps + j) * dim_, dim_};
  }

 private:
  TimeGrid grid_;
  std::int64_t count_;
  int dim_;
  std::vector<double> data_;
};

inline NoiseArray sample_brownian(const TimeGrid& grid, std::int64_t count, int dim,
                                  const Matrix& covariance, std::uint64_t seed,
                                  int workers = 0) {
  if (count < 1 || dim < 1) throw ConfigError("sample_brownian: count and dim must be positive");
  DynamicsModel probe;
  probe.control_dim = dim;
  probe.noise_covariance = covariance;
  const Matrix chol = probe.noise_cholesky();
  const double sqrt_dt = std::sqrt(grid.dt);

  NoiseArray out(grid, count, dim);
  detail::parallel_trajectories(
      count, detail::resolve_workers(workers, count), [&](std::int64_t i) {
        CounterStream stream(seed, static_cast<std::uint64_t>(i));
        Vector z(dim);
        for (std::int64_t j = 0; j < grid.steps; ++j) {
          for (int k = 0; k < dim; ++k) z(k) = stream.next_normal();
          out.mutable_increment(i, j).noalias() = sqrt_dt * (chol * z);
        }
      });
  return out;
}

/// Streaming variant of rollout + path_cost for large N: computes per-path
/// costs without storing trajectories. Produces exactly the costs that
/// path_cost(rollout(...), spec) would.
inline CostSet rollout_costs(const DynamicsModel& model, const Policy& policy,
                             const InitialState& init, const TimeGrid& grid, std::int64_t count,
                             std::uint64_t seed, const CostSpec& spec,
                             const RolloutOptions& options = {}) {
  detail::check_rollout_inputs(model, policy, init, count);
  check_temperature_coupling(model, spec);
  const Matrix chol = model.noise_cholesky();
  const double sqrt_dt = std::sqrt(grid.dt);
  const int n = model.state_dim;
  const int m = model.control_dim;
  const double bound = options.divergence_bound;
  const Matrix& R = spec.control_weight;

  CostSet set;
  set.temperature = spec.temperature;
  set.per_path.resize(static_cast<std::size_t>(count));
  std::vector<std::uint8_t> flagged(static_cast<std::size_t>(count), 0);

  detail::parallel_trajectories(
      count, detail::resolve_workers(options.workers, count), [&](std::int64_t i) {
        CounterStream stream(seed, static_cast<std::uint64_t>(i));
        Vector x(n), drift(n), u(m), z(m), dw(m), kick(m), ru(m);
        Matrix gain(n, m);

        init.draw(stream, x);
        if (!x.allFinite()) {
          throw DivergenceError("rollout: non-finite initial state on trajectory " +
                                    std::to_string(i),
                                i, 0);
        }
        PathCost cost;
        for (std::int64_t j = 0; j < grid.steps; ++j) {
          const double t = grid.time(j);
          model.drift(t, x, drift);
          model.control_gain(t, x, gain);
          policy.evaluate(t, x, u);
          if (!drift.allFinite() || !gain.allFinite() || !u.allFinite()) {
            throw DivergenceError("rollout: non-finite drift, gain or control on trajectory " +
                                      std::to_string(i) + " at step " + std::to_string(j),
                                  i, j);
          }
          for (int k = 0; k < m; ++k) z(k) = stream.next_normal();
          dw.noalias() = sqrt_dt * (chol * z);

          cost.state_integral += spec.state_cost(t, x) * grid.dt;
          ru.noalias() = R * u;
          cost.control_quad += 0.5 * ru.dot(u) * grid.dt;
          cost.control_cross += ru.dot(dw);

          kick = u * grid.dt + dw;
          x += drift * grid.dt;
          x.noalias() += gain * kick;
          if (!x.allFinite() || x.cwiseAbs().maxCoeff() > bound) {
            throw DivergenceError("rollout: trajectory " + std::to_string(i) +
                                      " diverged at step " + std::to_string(j + 1),
                                  i, j + 1);
          }
        }
        cost.terminal = spec.terminal_cost(x);
        set.per_path[static_cast<std::size_t>(i)] =
            detail::finalize_path_cost(cost, spec.temperature);
        if (!set.per_path[static_cast<std::size_t>(i)].is_finite) {
          flagged[static_cast<std::size_t>(i)] = 1;
        }
      });

  for (std::uint8_t f : flagged) set.flagged += f;
  return set;
}

}  // namespace picekit
