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
#include <stdexcept>
#include <string>

namespace picekit {

/// Base class for all picekit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid problem setup, bad configuration file, or inconsistent dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An estimate could not be formed (all weights vanished, singular systems, ...).
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Singular Gram matrix in a closed-form solve; remembers the failing time slice.
class IllConditionedError : public EstimationError {
 public:
  IllConditionedError(std::string message, std::int64_t time_slice)
      : EstimationError(std::move(message)), time_slice_(time_slice) {}

  std::int64_t time_slice() const { return time_slice_; }

 private:
  std::int64_t time_slice_;
};

/// A rollout produced a non-finite or out-of-bounds state; remembers where.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string message, std::int64_t trajectory, std::int64_t step)
      : Error(std::move(message)), trajectory_(trajectory), step_(step) {}

  std::int64_t trajectory() const { return trajectory_; }
  std::int64_t step() const { return step_; }

 private:
  std::int64_t trajectory_;
  std::int64_t step_;
};

}  // namespace picekit
