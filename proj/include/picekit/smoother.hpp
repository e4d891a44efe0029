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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "picekit/estimators.hpp"
#include "picekit/pice.hpp"
#include "picekit/policy.hpp"
#include "picekit/problem.hpp"
#include "picekit/simulate.hpp"

namespace picekit {

/// Posterior inference in a latent diffusion by controlled importance
/// sampling: fit a time-varying affine proposal controller u(s, x) = A(s) x +
/// b(s) to the exponentially weighted rollouts, resample under the improved
/// proposal, and report weighted posterior marginals. The open-loop variant
/// freezes A at zero and fits only the offset b(s).

struct SmootherConfig {
  std::int64_t iterations = 22;
  std::int64_t particles = 6000;
  std::uint64_t seed = 0;
  /// Ridge on the per-slice proposal fits. Refitting the proposal from the
  /// ensemble it reshapes is a feedback loop; the ridge caps each coefficient
  /// update (a solved change shrinks by eigenvalue / (eigenvalue + ridge))
  /// without moving the fixed point, which satisfies the undamped
  /// stationarity condition. Both proposal variants run the same recipe;
  /// open-loop refits have no state feedback to re-center the ensemble
  /// between iterations and may need a larger value to settle.
  double ridge = 0.5;
  /// Defensive mixing weight for the proposal fits: the fit runs on
  /// (1 - mix) w + mix / N instead of the raw weights w. The uniform
  /// component regresses the proposal's own centered noise, so it pulls the
  /// coefficient update toward zero in exactly the directions the weighted
  /// sample cannot resolve, and it leaves the fixed point unbiased: at
  /// stationarity both components vanish in expectation. Without it the
  /// refit loop can lock onto a narrow weighted band, extrapolate badly
  /// outside it and collapse the effective sample size.
  double defensive_mix = 0.2;
  bool open_loop = false;
  RolloutOptions rollout;

  void validate() const {
    if (iterations < 1) throw ConfigError("smoother.iterations: must be at least 1");
    if (particles < 2) throw ConfigError("smoother.particles: need at least 2 particles");
    if (defensive_mix < 0.0 || defensive_mix >= 1.0) {
      throw ConfigError("smoother.defensive_mix: must lie in [0, 1)");
    }
  }
};

struct SmootherIterate {
  double log_psi_hat = 0.0;
  double ess = 0.0;
  double seconds = 0.0;
};

struct SmootherResult {
  Matrix mean;  // (steps + 1) x n weighted posterior means
  Matrix std;   // (steps + 1) x n weighted posterior standard deviations
  double final_ess = 0.0;
  double final_log_psi = 0.0;
  double final_stderr_log_psi = 0.0;
  double final_weight_sumsq = 0.0;  // sum w_i^2 of the last batch
  std::vector<SmootherIterate> trace;
  std::vector<Matrix> gain;    // fitted A(s_j)
  std::vector<Vector> offset;  // fitted b(s_j)
  std::int64_t flagged_trajectories = 0;

  /// Monte Carlo standard error of the posterior mean at (node, coordinate).
  double stderr_mean(std::int64_t node, int coord) const {
    return std(node, coord) * std::sqrt(final_weight_sumsq);
  }
};

namespace detail {

inline WeightSummary mix_defensively(const WeightSummary& summary, double mix) {
  if (mix <= 0.0) return summary;
  WeightSummary mixed = summary;
  const double n = static_cast<double>(summary.weights.size());
  mixed.weights = ((1.0 - mix) * summary.weights.array() + mix / n).matrix();
  return mixed;
}

}  // namespace detail

/// One closed-form proposal update from a weighted batch, on defensively
/// mixed weights (see SmootherConfig::defensive_mix). The feedback fit solves
/// the per-slice system over the basis {x_1..x_n, 1}; the open-loop fit
/// solves over {1} only, leaving the gain untouched.
inline void fit_proposal(const TrajectoryBatch& batch, const WeightSummary& summary,
                         AffineFeedbackPolicy& proposal, double ridge = 0.5,
                         double defensive_mix = 0.2) {
  const WeightSummary mixed = detail::mix_defensively(summary, defensive_mix);
  if (!proposal.open_loop()) {
    const std::vector<Matrix> coeff = solve_closed_form_timedep(batch, mixed, proposal, ridge);
    for (std::int64_t j = 0; j < batch.grid().steps; ++j) {
      proposal.set_slice_coefficients(j, coeff[static_cast<std::size_t>(j)]);
    }
    return;
  }
  // Open loop: the Gram over the basis {1} is <1> = 1 and the damped update
  // is b_j += <dW_j> / (dt (1 + ridge)) on the mixed weights. Without the
  // state-feedback term nothing re-centers the ensemble between refits, so
  // the open-loop loop needs the heavier damping.
  const double dt = batch.grid().dt;
  const double damping = 1.0 + detail::effective_ridge(ridge, Matrix::Identity(1, 1));
  Vector mean_dw(batch.control_dim());
  for (std::int64_t j = 0; j < batch.grid().steps; ++j) {
    mean_dw.setZero();
    for (std::int64_t i = 0; i < batch.count(); ++i) {
      const double w = mixed.weights(i);
      if (w != 0.0) mean_dw += w * batch.noise(i, j);
    }
    proposal.set_offset(j, proposal.offset(j) + mean_dw / (dt * damping));
  }
}

namespace detail {

inline void weighted_marginals(const TrajectoryBatch& batch, const WeightSummary& summary,
                               Matrix& mean, Matrix& std) {
  const std::int64_t nodes = batch.grid().steps + 1;
  const int n = batch.state_dim();
  mean.setZero(nodes, n);
  std.setZero(nodes, n);
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    const double w = summary.weights(i);
    if (w == 0.0) continue;
    for (std::int64_t j = 0; j < nodes; ++j) {
      mean.row(j) += w * batch.state(i, j).transpose();
    }
  }
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    const double w = summary.weights(i);
    if (w == 0.0) continue;
    for (std::int64_t j = 0; j < nodes; ++j) {
      std.row(j) += w * (batch.state(i, j).transpose() - mean.row(j)).array().square().matrix();
    }
  }
  std = std.cwiseSqrt();
}

}  // namespace detail

/// Runs the adaptive proposal loop and reports weighted marginals of the last
/// batch. Iteration k samples with the proposal fitted on iteration k-1 and
/// the seed derive_seed(config.seed, k).
inline SmootherResult run_smoother(const ControlProblem& problem, const SmootherConfig& config) {
  config.validate();
  problem.validate();
  if (problem.model.control_dim != problem.model.state_dim) {
    throw ConfigError("smoother: proposal controller expects control_dim == state_dim");
  }

  AffineFeedbackPolicy proposal(problem.model.control_dim, problem.model.state_dim,
                                problem.grid);
  proposal.set_open_loop(config.open_loop);

  SmootherResult result;
  result.trace.reserve(static_cast<std::size_t>(config.iterations));
  for (std::int64_t iter = 0; iter < config.iterations; ++iter) {
    const auto started = std::chrono::steady_clock::now();
    const TrajectoryBatch batch =
        rollout(problem.model, proposal, problem.init, problem.grid, config.particles,
                derive_seed(config.seed, static_cast<std::uint64_t>(iter)), config.rollout);
    const CostSet costs = path_cost(batch, problem.cost);
    result.flagged_trajectories += costs.flagged;
    const WeightSummary summary = weights(costs);

    SmootherIterate record;
    record.log_psi_hat = summary.log_psi_hat;
    record.ess = entropic_ess(summary.weights);

    fit_proposal(batch, summary, proposal, config.ridge, config.defensive_mix);

    if (iter + 1 == config.iterations) {
      detail::weighted_marginals(batch, summary, result.mean, result.std);
      result.final_ess = record.ess;
      result.final_log_psi = record.log_psi_hat;
      result.final_stderr_log_psi = summary.stderr_log_psi;
      result.final_weight_sumsq = summary.weights.squaredNorm();
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.trace.push_back(record);
  }

  result.gain.reserve(static_cast<std::size_t>(problem.grid.steps));
  result.offset.reserve(static_cast<std::size_t>(problem.grid.steps));
  for (std::int64_t j = 0; j < problem.grid.steps; ++j) {
    result.gain.push_back(proposal.gain(j));
    result.offset.push_back(proposal.offset(j));
  }
  return result;
}

/// Baseline with the feedback gain frozen at zero, u(s, x) = b(s).
inline SmootherResult run_open_loop_baseline(const ControlProblem& problem,
                                             SmootherConfig config) {
  config.open_loop = true;
  return run_smoother(problem, config);
}

}  // namespace picekit
