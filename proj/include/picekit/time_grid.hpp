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

#include "picekit/errors.hpp"

namespace picekit {

/// Uniform discretization of the horizon [t0, t0 + steps * dt].
///
/// Grid nodes are s_j = t0 + j * dt for j = 0..steps; controls and noise
/// increments live on the left endpoints s_0..s_{steps-1}.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  std::int64_t steps = 0;

  TimeGrid() = default;

  TimeGrid(double t0_, double dt_, std::int64_t steps_) : t0(t0_), dt(dt_), steps(steps_) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
      throw ConfigError("time grid: dt must be positive and finite");
    }
    if (steps < 1) {
      throw ConfigError("time grid: step count must be at least 1");
    }
  }

  double time(std::int64_t j) const { return t0 + static_cast<double>(j) * dt; }
  double horizon() const { return time(steps); }

  /// Nearest grid node index for a time in [t0, horizon], clamped to range.
  std::int64_t nearest_node(double t) const {
    const double raw = std::round((t - t0) / dt);
    if (raw < 0.0) return 0;
    if (raw > static_cast<double>(steps)) return steps;
    return static_cast<std::int64_t>(raw);
  }
};

}  // namespace picekit
