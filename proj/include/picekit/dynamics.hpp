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

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <utility>

#include "picekit/errors.hpp"
#include "picekit/rng.hpp"

namespace picekit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Drift and gain callbacks write into a caller-provided buffer so the hot
/// simulation loop stays allocation free.
using DriftFn = std::function<void(double time, const Vector& state, Vector& out)>;
using GainFn = std::function<void(double time, const Vector& state, Matrix& out)>;

/// Controlled diffusion dX = f(s,X) ds + g(s,X) (u ds + dW) with
/// E dW dW' = noise_covariance * ds.
struct DynamicsModel {
  int state_dim = 0;
  int control_dim = 0;
  DriftFn drift;
  GainFn control_gain;
  Matrix noise_covariance;  // m x m, symmetric positive definite

  /// Lower Cholesky factor of the noise covariance.
  /// Throws ConfigError when the covariance is not symmetric positive definite.
  Matrix noise_cholesky() const {
    if (noise_covariance.rows() != control_dim || noise_covariance.cols() != control_dim) {
      throw ConfigError("dynamics: noise covariance must be control_dim x control_dim");
    }
    if (!noise_covariance.isApprox(noise_covariance.transpose(), 1e-12)) {
      throw ConfigError("dynamics: noise covariance must be symmetric");
    }
    Eigen::LLT<Matrix> llt(noise_covariance);
    if (llt.info() != Eigen::Success) {
      throw ConfigError("dynamics: noise covariance must be positive definite");
    }
    return llt.matrixL();
  }
};

/// Convenience constructor for models with callbacks returning by value.
inline DynamicsModel make_model(int state_dim, int control_dim,
                                std::function<Vector(double, const Vector&)> drift,
                                std::function<Matrix(double, const Vector&)> gain,
                                Matrix noise_covariance) {
  DynamicsModel model;
  model.state_dim = state_dim;
  model.control_dim = control_dim;
  model.drift = [fn = std::move(drift)](double t, const Vector& x, Vector& out) { out = fn(t, x); };
  model.control_gain = [fn = std::move(gain)](double t, const Vector& x, Matrix& out) {
    out = fn(t, x);
  };
  model.noise_covariance = std::move(noise_covariance);
  return model;
}

/// Initial condition of a rollout: either one fixed state or a per-trajectory
/// sampler drawing from the trajectory's own random stream.
class InitialState {
 public:
  using Sampler = std::function<void(CounterStream&, Vector&)>;

  /// Fixed initial point.
  static InitialState fixed(Vector x0) {
    InitialState init;
    init.fixed_ = std::move(x0);
    return init;
  }

  /// Randomized initial point; `dim` is the state dimension.
  static InitialState sampled(int dim, Sampler sampler) {
    InitialState init;
    init.dim_ = dim;
    init.sampler_ = std::move(sampler);
    return init;
  }

  bool is_fixed() const { return !sampler_; }

  const Vector& fixed_state() const {
    if (!is_fixed()) {
      throw ConfigError("initial state: sampler-based initial condition has no fixed state");
    }
    return fixed_;
  }

  int dim() const { return is_fixed() ? static_cast<int>(fixed_.size()) : dim_; }

  void draw(CounterStream& stream, Vector& out) const {
    if (is_fixed()) {
      out = fixed_;
    } else {
      out.resize(dim_);
      sampler_(stream, out);
    }
  }

 private:
  Vector fixed_;
  int dim_ = 0;
  Sampler sampler_;
};

}  // namespace picekit
