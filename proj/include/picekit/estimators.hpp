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

#include "picekit/cost.hpp"
#include "picekit/errors.hpp"
#include "picekit/trajectory.hpp"

namespace picekit {

/// Log-normalizer estimate with a delta-method standard error.
struct PsiEstimate {
  double log_psi_hat = 0.0;
  double stderr_log_psi = 0.0;
};

/// Estimates log psi = log E exp(-S) from a cost sample in shifted arithmetic.
/// Requires at least two finite-cost trajectories.
inline PsiEstimate estimate_psi(const CostSet& costs) {
  if (costs.count() - costs.flagged < 2) {
    throw EstimationError("estimate_psi: need at least two finite-cost trajectories");
  }
  const WeightSummary summary = weights(costs);
  return {summary.log_psi_hat, summary.stderr_log_psi};
}

/// Entropic effective sample size of normalized weights, in (0, 1]:
///   ss = -(1 / log N) sum_i w_i log w_i, with 0 log 0 = 0.
/// 1 for uniform weights; tends to 0 as one weight dominates.
inline double entropic_ess(const Vector& normalized_weights) {
  const std::int64_t n = normalized_weights.size();
  if (n < 2) throw ConfigError("entropic_ess: need at least two weights");
  double entropy = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double w = normalized_weights(i);
    if (w > 0.0) entropy -= w * std::log(w);
  }
  const double ss = entropy / std::log(static_cast<double>(n));
  return ss < 0.0 ? 0.0 : ss;
}

/// Summary of one weighted batch: log-normalizer, cost-to-go estimate
/// J = -lambda log psi, optimal control estimate at the rollout origin, and
/// sampling-quality diagnostics.
struct PiEstimate {
  double log_psi_hat = 0.0;
  double j_hat = 0.0;
  Vector u_star_hat;
  double ess = 0.0;
  double stderr_log_psi = 0.0;
};

/// Estimates the optimal control at the rollout origin (t0, x0):
///   u*(t0, x0) ~= u(t0, x0) + sum_i w_i W_i(t0 + eps) / eps
/// where W_i is the cumulative noise of trajectory i over the first
/// `eps_steps` steps and eps = eps_steps * dt. The limit eps -> 0 is exact but
/// numerically unstable, so eps stays finite (default one integrator step).
/// Requires a fixed initial state.
inline Vector estimate_u_star(const TrajectoryBatch& batch, const WeightSummary& summary,
                              std::int64_t eps_steps = 1) {
  if (!batch.initial().is_fixed()) {
    throw ConfigError("estimate_u_star: batch must start from a fixed initial state");
  }
  if (eps_steps < 1 || eps_steps > batch.grid().steps) {
    throw ConfigError("estimate_u_star: eps_steps must lie in [1, steps]");
  }
  const double eps = static_cast<double>(eps_steps) * batch.grid().dt;
  Vector correction = Vector::Zero(batch.control_dim());
  Vector cumulative(batch.control_dim());
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    const double w = summary.weights(i);
    if (w == 0.0) continue;
    cumulative.setZero();
    for (std::int64_t j = 0; j < eps_steps; ++j) cumulative += batch.noise(i, j);
    correction += w * cumulative;
  }
  // All trajectories share u(t0, x0) because the initial state is fixed.
  Vector u_star = batch.control(0, 0);
  u_star += correction / eps;
  return u_star;
}

/// Full estimate bundle for one batch.
inline PiEstimate estimate(const TrajectoryBatch& batch, const CostSet& costs,
                           std::int64_t eps_steps = 1) {
  if (costs.count() - costs.flagged < 2) {
    throw EstimationError("estimate: need at least two finite-cost trajectories");
  }
  const WeightSummary summary = weights(costs);
  PiEstimate out;
  out.log_psi_hat = summary.log_psi_hat;
  out.stderr_log_psi = summary.stderr_log_psi;
  out.j_hat = -costs.temperature * summary.log_psi_hat;
  out.ess = entropic_ess(summary.weights);
  // The origin control is only defined for a fixed initial state; batches
  // with a sampled start leave it empty.
  if (batch.initial().is_fixed()) {
    out.u_star_hat = estimate_u_star(batch, summary, eps_steps);
  }
  return out;
}

/// Statistics of exp(-S_i) - psi(t0, x0) against a reference normalizer.
/// When sampling with the optimal control the residual vanishes path by path;
/// for any sampling control its mean vanishes in expectation.
struct ResidualStats {
  double mean = 0.0;
  double variance = 0.0;
  double stderr_mean = 0.0;
  std::int64_t count = 0;
};

inline ResidualStats residual_vs_reference(const CostSet& costs, double psi_reference) {
  ResidualStats stats;
  double sum = 0.0;
  for (const PathCost& c : costs.per_path) {
    if (!c.is_finite) continue;
    sum += std::exp(-c.total) - psi_reference;
    ++stats.count;
  }
  if (stats.count < 2) {
    throw EstimationError("residual_vs_reference: need at least two finite-cost trajectories");
  }
  stats.mean = sum / static_cast<double>(stats.count);
  double ss = 0.0;
  for (const PathCost& c : costs.per_path) {
    if (!c.is_finite) continue;
    const double d = std::exp(-c.total) - psi_reference - stats.mean;
    ss += d * d;
  }
  stats.variance = ss / static_cast<double>(stats.count - 1);
  stats.stderr_mean = std::sqrt(stats.variance / static_cast<double>(stats.count));
  return stats;
}

}  // namespace picekit
