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

#include <cstdint>
#include <vector>

#include "picekit/dynamics.hpp"
#include "picekit/time_grid.hpp"

namespace picekit {

using ConstVectorView = Eigen::Map<const Vector>;
using VectorView = Eigen::Map<Vector>;

/// A batch of N simulated trajectories with everything downstream estimators
/// need: states on all grid nodes, the Gaussian increments that drove each
/// step, the controls that were applied, and the seed that generated it all.
///
/// Replay identity: state(i, j+1) equals
///   state(i, j) + f dt + g (control(i, j) dt + noise(i, j))
/// bit for bit, so re-integration from the stored noise reproduces the stored
/// states exactly. Batches are filled once by the simulator and treated as
/// immutable afterwards; concurrent read access is safe.
class TrajectoryBatch {
 public:
  TrajectoryBatch(TimeGrid grid, int state_dim, int control_dim, std::int64_t count,
                  std::uint64_t seed, InitialState init)
      : grid_(grid),
        state_dim_(state_dim),
        control_dim_(control_dim),
        count_(count),
        seed_(seed),
        init_(std::move(init)),
        states_(static_cast<std::size_t>(count * (grid.steps + 1) * state_dim)),
        noise_(static_cast<std::size_t>(count * grid.steps * control_dim)),
        controls_(static_cast<std::size_t>(count * grid.steps * control_dim)) {}

  const TimeGrid& grid() const { return grid_; }
  int state_dim() const { return state_dim_; }
  int control_dim() const { return control_dim_; }
  std::int64_t count() const { return count_; }
  std::uint64_t seed() const { return seed_; }
  const InitialState& initial() const { return init_; }

  /// State of trajectory i at grid node j (j in 0..steps).
  ConstVectorView state(std::int64_t i, std::int64_t j) const {
    return {states_.data() + (i * (grid_.steps + 1) + j) * state_dim_, state_dim_};
  }

  /// Gaussian increment applied on step j of trajectory i (j in 0..steps-1).
  ConstVectorView noise(std::int64_t i, std::int64_t j) const {
    return {noise_.data() + (i * grid_.steps + j) * control_dim_, control_dim_};
  }

  /// Control applied on step j of trajectory i.
  ConstVectorView control(std::int64_t i, std::int64_t j) const {
    return {controls_.data() + (i * grid_.steps + j) * control_dim_, control_dim_};
  }

  // Mutable views used by the simulator while the batch is being filled.
  VectorView mutable_state(std::int64_t i, std::int64_t j) {
    return {states_.data() + (i * (grid_.steps + 1) + j) * state_dim_, state_dim_};
  }
  VectorView mutable_noise(std::int64_t i, std::int64_t j) {
    return {noise_.data() + (i * grid_.steps + j) * control_dim_, control_dim_};
  }
  VectorView mutable_control(std::int64_t i, std::int64_t j) {
    return {controls_.data() + (i * grid_.steps + j) * control_dim_, control_dim_};
  }

 private:
  TimeGrid grid_;
  int state_dim_;
  int control_dim_;
  std::int64_t count_;
  std::uint64_t seed_;
  InitialState init_;
  std::vector<double> states_;
  std::vector<double> noise_;
  std::vector<double> controls_;
};

}  // namespace picekit
