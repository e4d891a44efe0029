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
#include <limits>
#include <utility>
#include <vector>

#include "picekit/dynamics.hpp"
#include "picekit/errors.hpp"
#include "picekit/trajectory.hpp"

namespace picekit {

using StateCostFn = std::function<double(double time, const Vector& state)>;
using TerminalCostFn = std::function<double(const Vector& state)>;

/// Running and terminal costs of a control problem, together with the control
/// weight R and the temperature lambda that couples R to the noise covariance
/// (lambda I = R nu).
struct CostSpec {
  StateCostFn state_cost;        // V(s, x)
  TerminalCostFn terminal_cost;  // Phi(x)
  Matrix control_weight;         // R, m x m positive definite
  double temperature = 1.0;      // lambda > 0

  /// Quadratic state cost V = x' Q x / 2 and no terminal cost; the shape every
  /// benchmark here starts from.
  static CostSpec quadratic_state(Matrix q_weight, Matrix control_weight, double temperature) {
    CostSpec spec;
    spec.state_cost = [q = std::move(q_weight)](double, const Vector& x) {
      return 0.5 * x.dot(q * x);
    };
    spec.terminal_cost = [](const Vector&) { return 0.0; };
    spec.control_weight = std::move(control_weight);
    spec.temperature = temperature;
    return spec;
  }
};

/// Verifies lambda I = R nu (relative tolerance 1e-10) and basic shape and
/// definiteness requirements. Throws ConfigError on violation.
inline void check_temperature_coupling(const DynamicsModel& model, const CostSpec& spec) {
  const int m = model.control_dim;
  if (spec.control_weight.rows() != m || spec.control_weight.cols() != m) {
    throw ConfigError("cost: control weight must be control_dim x control_dim");
  }
  if (!(spec.temperature > 0.0) || !std::isfinite(spec.temperature)) {
    throw ConfigError("cost: temperature must be positive and finite");
  }
  Eigen::LLT<Matrix> llt(spec.control_weight);
  if (!spec.control_weight.isApprox(spec.control_weight.transpose(), 1e-12) ||
      llt.info() != Eigen::Success) {
    throw ConfigError("cost: control weight must be symmetric positive definite");
  }
  const Matrix product = spec.control_weight * model.noise_covariance;
  const Matrix target = spec.temperature * Matrix::Identity(m, m);
  const double scale = std::max(spec.temperature, product.cwiseAbs().maxCoeff());
  if ((product - target).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ConfigError(
        "cost: temperature coupling violated, R * noise_covariance must equal lambda * I");
  }
}

/// Path cost decomposition for one trajectory. `total` is the temperature-
/// scaled sum (terminal + state + quadratic + cross) / lambda that exponential
/// weighting acts on.
struct PathCost {
  double terminal = 0.0;
  double state_integral = 0.0;
  double control_quad = 0.0;
  double control_cross = 0.0;
  double total = 0.0;
  bool is_finite = true;
};

/// Per-trajectory path costs for a batch; flagged trajectories carry weight
/// zero downstream instead of aborting a long learning run.
struct CostSet {
  std::vector<PathCost> per_path;
  std::int64_t flagged = 0;
  double temperature = 1.0;

  std::int64_t count() const { return static_cast<std::int64_t>(per_path.size()); }

  std::vector<double> totals() const {
    std::vector<double> out(per_path.size());
    for (std::size_t i = 0; i < per_path.size(); ++i) out[i] = per_path[i].total;
    return out;
  }
};

namespace detail {

inline PathCost finalize_path_cost(PathCost cost, double lambda) {
  const double sum =
      cost.terminal + cost.state_integral + cost.control_quad + cost.control_cross;
  cost.total = sum / lambda;
  cost.is_finite = std::isfinite(cost.total);
  if (!cost.is_finite) cost.total = std::numeric_limits<double>::infinity();
  return cost;
}

}  // namespace detail

/// Evaluates the path cost of every trajectory in a batch from its stored
/// states, controls and noise increments:
///   S_i = (Phi(X_M) + sum_j V(s_j, X_j) dt + sum_j u_j' R u_j dt / 2
///          + sum_j u_j' R dW_j) / lambda.
/// The cross term uses the stored increments, which keeps it exact under the
/// replay identity.
inline CostSet path_cost(const TrajectoryBatch& batch, const CostSpec& spec) {
  const TimeGrid& grid = batch.grid();
  const double dt = grid.dt;
  const Matrix& R = spec.control_weight;

  CostSet set;
  set.temperature = spec.temperature;
  set.per_path.resize(static_cast<std::size_t>(batch.count()));

  Vector ru(batch.control_dim());
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    PathCost cost;
    for (std::int64_t j = 0; j < grid.steps; ++j) {
      const auto x = batch.state(i, j);
      const auto u = batch.control(i, j);
      const auto dw = batch.noise(i, j);
      cost.state_integral += spec.state_cost(grid.time(j), x) * dt;
      ru.noalias() = R * u;
      cost.control_quad += 0.5 * ru.dot(u) * dt;
      cost.control_cross += ru.dot(dw);
    }
    cost.terminal = spec.terminal_cost(batch.state(i, grid.steps));
    set.per_path[static_cast<std::size_t>(i)] =
        detail::finalize_path_cost(cost, spec.temperature);
    if (!set.per_path[static_cast<std::size_t>(i)].is_finite) ++set.flagged;
  }
  return set;
}

/// Normalized importance weights and the log-normalizer of a cost sample.
struct WeightSummary {
  Vector weights;           // w_i >= 0, sum w_i = 1
  double log_psi_hat = 0.0;  // log( (1/N) sum exp(-S_i) ), shifted arithmetic
  double stderr_log_psi = 0.0;
  std::int64_t finite_count = 0;
};

/// Converts path costs to normalized exponential weights at the batch's
/// temperature, in shifted (log-sum-exp) arithmetic. Non-finite costs get
/// weight zero but still count toward N. Throws EstimationError when every
/// trajectory is flagged.
inline WeightSummary weights(const std::vector<double>& costs) {
  const std::int64_t n = static_cast<std::int64_t>(costs.size());
  if (n < 1) throw EstimationError("weights: empty cost sample");

  double shift = std::numeric_limits<double>::infinity();
  std::int64_t finite_count = 0;
  for (double s : costs) {
    if (std::isfinite(s)) {
      ++finite_count;
      shift = std::min(shift, s);
    }
  }
  if (finite_count == 0) {
    throw EstimationError("weights: all trajectories have non-finite cost");
  }

  WeightSummary summary;
  summary.finite_count = finite_count;
  summary.weights.resize(n);
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double s = costs[static_cast<std::size_t>(i)];
    const double y = std::isfinite(s) ? std::exp(-(s - shift)) : 0.0;
    summary.weights(i) = y;
    sum += y;
  }
  if (!(sum > 0.0)) {
    throw EstimationError("weights: exponential weights underflowed to zero");
  }

  const double mean = sum / static_cast<double>(n);
  summary.log_psi_hat = -shift + std::log(mean);

  // Delta method on the shifted sample: se(log psi) = sd(y) / (sqrt(N) mean(y)).
  if (n > 1) {
    double ss = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double d = summary.weights(i) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    summary.stderr_log_psi = sd / (std::sqrt(static_cast<double>(n)) * mean);
  }

  summary.weights /= sum;
  return summary;
}

inline WeightSummary weights(const CostSet& costs) { return weights(costs.totals()); }

}  // namespace picekit
