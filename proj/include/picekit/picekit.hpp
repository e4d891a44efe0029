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

#include "picekit/benchmarks.hpp"
#include "picekit/config.hpp"
#include "picekit/cost.hpp"
#include "picekit/csv.hpp"
#include "picekit/dynamics.hpp"
#include "picekit/errors.hpp"
#include "picekit/estimators.hpp"
#include "picekit/experiment.hpp"
#include "picekit/pice.hpp"
#include "picekit/policy.hpp"
#include "picekit/problem.hpp"
#include "picekit/rng.hpp"
#include "picekit/simulate.hpp"
#include "picekit/smoother.hpp"
#include "picekit/time_grid.hpp"
#include "picekit/trajectory.hpp"
#include "picekit/version.hpp"
