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

#include "picekit/cost.hpp"
#include "picekit/dynamics.hpp"
#include "picekit/time_grid.hpp"

namespace picekit {

/// A complete finite-horizon problem: dynamics, costs, time grid and the
/// initial condition rollouts start from.
struct ControlProblem {
  DynamicsModel model;
  CostSpec cost;
  TimeGrid grid;
  InitialState init;

  /// Validates dimensions and the temperature coupling lambda I = R nu.
  void validate() const {
    model.noise_cholesky();
    check_temperature_coupling(model, cost);
    if (init.dim() != model.state_dim) {
      throw ConfigError("problem: initial state dimension does not match the model");
    }
  }
};

}  // namespace picekit
