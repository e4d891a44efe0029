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
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "picekit/cost.hpp"
#include "picekit/errors.hpp"
#include "picekit/estimators.hpp"
#include "picekit/policy.hpp"
#include "picekit/problem.hpp"
#include "picekit/rng.hpp"
#include "picekit/simulate.hpp"
#include "picekit/trajectory.hpp"

namespace picekit {

/// Path-integral cross-entropy learning: fit a parametrized feedback
/// controller by minimizing the KL divergence from the optimally controlled
/// path distribution to the controller's path distribution, estimated with
/// exponentially weighted rollouts sampled under the current controller.
///
/// Linear-in-basis controllers admit closed-form coefficient solves; arbitrary
/// parametrizations use stochastic gradient steps. Both come in a
/// time-indexed and a time-independent (static) flavor.

enum class PiceMode {
  kClosedFormTimedep,
  kClosedFormStatic,
  kGradientTimedep,
  kGradientStatic,
};

inline const char* to_string(PiceMode mode) {
  switch (mode) {
    case PiceMode::kClosedFormTimedep: return "closed_form_timedep";
    case PiceMode::kClosedFormStatic: return "closed_form_static";
    case PiceMode::kGradientTimedep: return "gradient_timedep";
    case PiceMode::kGradientStatic: return "gradient_static";
  }
  return "unknown";
}

inline PiceMode pice_mode_from_string(const std::string& name) {
  if (name == "closed_form_timedep") return PiceMode::kClosedFormTimedep;
  if (name == "closed_form_static") return PiceMode::kClosedFormStatic;
  if (name == "gradient_timedep") return PiceMode::kGradientTimedep;
  if (name == "gradient_static") return PiceMode::kGradientStatic;
  throw ConfigError("pice.mode: unknown mode '" + name + "'");
}

inline bool is_gradient_mode(PiceMode mode) {
  return mode == PiceMode::kGradientTimedep || mode == PiceMode::kGradientStatic;
}

struct PiceConfig {
  PiceMode mode = PiceMode::kGradientStatic;
  std::int64_t iterations = 0;
  std::int64_t samples = 0;   // N rollouts per iteration
  double learning_rate = 0.1;  // eta, gradient modes only
  /// Ridge added to closed-form Gram matrices. Negative selects the automatic
  /// value 1e-8 * trace(Gram) / K, which keeps rank-deficient bases (for
  /// example grid cells nobody visited) solvable.
  double ridge = -1.0;
  std::uint64_t seed = 0;
  RolloutOptions rollout;

  void validate() const {
    if (samples < 2) throw ConfigError("pice.samples: need at least 2 rollouts per iteration");
    if (iterations < 0) throw ConfigError("pice.iterations: must be non-negative");
    if (is_gradient_mode(mode) && !(learning_rate > 0.0)) {
      throw ConfigError("pice.eta: learning rate must be positive");
    }
  }
};

/// Per-iteration record of an adaptive run.
struct PiceIterate {
  Vector theta;       // parameters after this iteration's update
  double j_hat = 0.0;  // -lambda log psi_hat of the sampling batch
  double ess = 0.0;
  double grad_norm = 0.0;  // gradient modes; 0 for closed-form updates
  double seconds = 0.0;    // wall clock of the iteration
};

struct PiceTrace {
  std::vector<PiceIterate> iterates;
  std::int64_t flagged_trajectories = 0;
  std::int64_t skipped_updates = 0;
};

namespace detail {

inline double effective_ridge(double configured, const Matrix& gram) {
  if (configured >= 0.0) return configured;
  return 1e-8 * gram.trace() / static_cast<double>(gram.rows());
}

/// Solves (gram + ridge I) delta = rhs. With zero ridge a numerically singular
/// Gram matrix raises IllConditionedError naming the offending time slice.
inline Matrix solve_gram(const Matrix& gram, const Matrix& rhs, double ridge,
                         std::int64_t slice) {
  Matrix lhs = gram;
  lhs.diagonal().array() += ridge;
  Eigen::LDLT<Matrix> ldlt(lhs);
  bool ok = ldlt.info() == Eigen::Success;
  if (ok && ridge == 0.0) {
    const Vector d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    ok = d.minCoeff() > 1e-13 * std::max(dmax, 1.0);
  }
  if (!ok) {
    throw IllConditionedError(
        "closed-form solve: singular Gram matrix at time slice " + std::to_string(slice) +
            " (ridge is zero)",
        slice);
  }
  return ldlt.solve(rhs);
}

}  // namespace detail

/// Closed-form coefficient update for a time-indexed linear-in-basis
/// controller. For every time slice s the stationarity condition is a K x K
/// linear system in the coefficient change:
///   sum_l (theta_sl - theta0_sl) <h_sl h_sk> = <(dW_s / dt) h_sk>,
/// with <.> the normalized-weight batch mean. The batch must have been sampled
/// with the controller parametrized by theta0. Returns the updated
/// coefficients without touching the policy.
inline std::vector<Matrix> solve_closed_form_timedep(const TrajectoryBatch& batch,
                                                     const WeightSummary& summary,
                                                     const LinearInBasis& basis,
                                                     double ridge = -1.0) {
  const std::int64_t steps = batch.grid().steps;
  if (basis.slice_count() != steps) {
    throw ConfigError("closed-form solve: controller slice count does not match the grid");
  }
  const int K = basis.basis_count();
  const int m = batch.control_dim();
  const double dt = batch.grid().dt;

  std::vector<Matrix> updated(static_cast<std::size_t>(steps));
  Matrix gram(K, K);
  Matrix rhs(K, m);
  Vector h(K);
  for (std::int64_t j = 0; j < steps; ++j) {
    gram.setZero();
    rhs.setZero();
    for (std::int64_t i = 0; i < batch.count(); ++i) {
      const double w = summary.weights(i);
      if (w == 0.0) continue;
      basis.basis_values(batch.state(i, j), h);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(h, w);
      rhs.noalias() += (w / dt) * h * batch.noise(i, j).transpose();
    }
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    const Matrix delta = detail::solve_gram(gram, rhs, detail::effective_ridge(ridge, gram), j);
    updated[static_cast<std::size_t>(j)] = basis.slice_coefficients(j) + delta.transpose();
  }
  return updated;
}

/// Closed-form coefficient update for a static (time-independent)
/// linear-in-basis controller. One K x K system with time-integrated moments:
///   sum_l (theta_l - theta0_l) <sum_j h_l h_k dt> = <sum_j h_k dW_j>.
inline Matrix solve_closed_form_static(const TrajectoryBatch& batch,
                                       const WeightSummary& summary, const LinearInBasis& basis,
                                       double ridge = -1.0) {
  if (basis.slice_count() != 1) {
    throw ConfigError("closed-form solve: static update requires a static controller");
  }
  const int K = basis.basis_count();
  const int m = batch.control_dim();
  const double dt = batch.grid().dt;

  Matrix gram = Matrix::Zero(K, K);
  Matrix rhs = Matrix::Zero(K, m);
  Vector h(K);
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    const double w = summary.weights(i);
    if (w == 0.0) continue;
    for (std::int64_t j = 0; j < batch.grid().steps; ++j) {
      basis.basis_values(batch.state(i, j), h);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(h, w * dt);
      rhs.noalias() += w * h * batch.noise(i, j).transpose();
    }
  }
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  const Matrix delta = detail::solve_gram(gram, rhs, detail::effective_ridge(ridge, gram), 0);
  return basis.slice_coefficients(0) + delta.transpose();
}

/// Gradient-mode update direction (the batch must be self-sampled, i.e.
/// generated under the current policy parameters):
///   static:       g = < sum_j (du/dtheta)(s_j, X_j)' dW_j >
///   time-indexed: g = < sum_j (du/dtheta)(s_j, X_j)' dW_j > / dt
/// The parameter step is theta += eta * g.
inline Vector update_direction(const TrajectoryBatch& batch, const WeightSummary& summary,
                               const Policy& policy, PiceMode mode) {
  Vector direction = Vector::Zero(policy.param_count());
  const double scale = mode == PiceMode::kGradientTimedep ? 1.0 / batch.grid().dt : 1.0;
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    const double w = summary.weights(i);
    if (w == 0.0) continue;
    for (std::int64_t j = 0; j < batch.grid().steps; ++j) {
      policy.accumulate_jacobian(batch.grid().time(j), batch.state(i, j), batch.noise(i, j),
                                 w * scale, direction);
    }
  }
  return direction;
}

struct GradientStepResult {
  Vector theta;
  Vector gradient;  // update direction (before the learning-rate factor)
  bool applied = false;
};

/// One stochastic update step. A non-finite gradient aborts the update and
/// leaves the parameters untouched.
inline GradientStepResult gradient_step(const TrajectoryBatch& batch,
                                        const WeightSummary& summary, Policy& policy,
                                        PiceMode mode, double learning_rate) {
  if (!is_gradient_mode(mode)) {
    throw ConfigError("gradient_step: called with a closed-form mode");
  }
  GradientStepResult result;
  result.gradient = update_direction(batch, summary, policy, mode);
  result.theta = policy.params();
  if (!result.gradient.allFinite()) {
    return result;
  }
  result.theta += learning_rate * result.gradient;
  policy.set_params(result.theta);
  result.applied = true;
  return result;
}

/// The sampled KL objective for a frozen batch, as a function of candidate
/// parameters theta while the sampling control u0 (stored in the batch) and
/// the weights stay fixed:
///   D(theta) = < sum_j ( u_th' R u_th / 2 - u_th' R u0_j ) dt
///               - sum_j u_th' R dW_j >,   u_th = u(s_j, X_j | theta).
/// Minimizing D over theta is the cross-entropy projection of the optimally
/// controlled path measure onto the controller family.
inline double kl_objective(const TrajectoryBatch& batch, const WeightSummary& summary,
                           const Policy& policy, const Matrix& control_weight) {
  const double dt = batch.grid().dt;
  double total = 0.0;
  Vector u(policy.control_dim()), ru(policy.control_dim());
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    const double w = summary.weights(i);
    if (w == 0.0) continue;
    double path_term = 0.0;
    for (std::int64_t j = 0; j < batch.grid().steps; ++j) {
      policy.evaluate(batch.grid().time(j), batch.state(i, j), u);
      ru.noalias() = control_weight * u;
      path_term += (0.5 * ru.dot(u) - ru.dot(batch.control(i, j))) * dt;
      path_term -= ru.dot(batch.noise(i, j));
    }
    total += w * path_term;
  }
  return total;
}

/// Exact gradient of kl_objective with respect to theta, including the
/// (u_theta - u0) term that appears when theta differs from the sampling
/// parameters:
///   dD/dtheta = < sum_j (du/dtheta)' R (u_th - u0_j) dt
///               - sum_j (du/dtheta)' R dW_j >.
/// At theta = theta0 this reduces to minus the static update direction (for
/// unit R), which is the self-sampling simplification the learning loop uses.
inline Vector kl_gradient(const TrajectoryBatch& batch, const WeightSummary& summary,
                          const Policy& policy, const Matrix& control_weight) {
  const double dt = batch.grid().dt;
  Vector grad = Vector::Zero(policy.param_count());
  Vector u(policy.control_dim()), factor(policy.control_dim());
  for (std::int64_t i = 0; i < batch.count(); ++i) {
    const double w = summary.weights(i);
    if (w == 0.0) continue;
    for (std::int64_t j = 0; j < batch.grid().steps; ++j) {
      const double t = batch.grid().time(j);
      const auto x = batch.state(i, j);
      policy.evaluate(t, x, u);
      factor.noalias() = control_weight * (u - batch.control(i, j)) * dt;
      factor.noalias() -= control_weight * batch.noise(i, j);
      policy.accumulate_jacobian(t, x, factor, w, grad);
    }
  }
  return grad;
}

namespace detail {

inline void apply_closed_form(const TrajectoryBatch& batch, const WeightSummary& summary,
                              Policy& policy, PiceMode mode, double ridge) {
  auto* linear = dynamic_cast<LinearInBasis*>(&policy);
  if (linear == nullptr) {
    throw ConfigError("pice: closed-form modes require a linear-in-basis controller");
  }
  if (mode == PiceMode::kClosedFormTimedep) {
    const std::vector<Matrix> coeff = solve_closed_form_timedep(batch, summary, *linear, ridge);
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(coeff.size()); ++j) {
      linear->set_slice_coefficients(j, coeff[static_cast<std::size_t>(j)]);
    }
  } else {
    linear->set_slice_coefficients(0, solve_closed_form_static(batch, summary, *linear, ridge));
  }
}

}  // namespace detail

/// Adaptive importance-sampling loop: sample N rollouts under the current
/// parameters, weight them, update the parameters, repeat. Iteration k uses
/// the seed derive_seed(config.seed, k), so a run is a pure function of the
/// problem, the initial parameters and the configuration.
inline PiceTrace run_adaptive(const ControlProblem& problem, Policy& policy,
                              const PiceConfig& config) {
  config.validate();
  problem.validate();

  PiceTrace trace;
  trace.iterates.reserve(static_cast<std::size_t>(config.iterations));
  for (std::int64_t iter = 0; iter < config.iterations; ++iter) {
    const auto started = std::chrono::steady_clock::now();
    try {
      const TrajectoryBatch batch =
          rollout(problem.model, policy, problem.init, problem.grid, config.samples,
                  derive_seed(config.seed, static_cast<std::uint64_t>(iter)), config.rollout);
      const CostSet costs = path_cost(batch, problem.cost);
      trace.flagged_trajectories += costs.flagged;
      const WeightSummary summary = weights(costs);

      PiceIterate record;
      record.j_hat = -costs.temperature * summary.log_psi_hat;
      record.ess = entropic_ess(summary.weights);

      if (is_gradient_mode(config.mode)) {
        const GradientStepResult step =
            gradient_step(batch, summary, policy, config.mode, config.learning_rate);
        record.grad_norm = step.applied ? step.gradient.norm() : 0.0;
        if (!step.applied) ++trace.skipped_updates;
      } else {
        detail::apply_closed_form(batch, summary, policy, config.mode, config.ridge);
      }

      record.theta = policy.params();
      record.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      trace.iterates.push_back(std::move(record));
    } catch (const DivergenceError& e) {
      throw DivergenceError("pice iteration " + std::to_string(iter) + ": " + e.what(),
                            e.trajectory(), e.step());
    } catch (const IllConditionedError& e) {
      throw IllConditionedError("pice iteration " + std::to_string(iter) + ": " + e.what(),
                                e.time_slice());
    } catch (const EstimationError& e) {
      throw EstimationError("pice iteration " + std::to_string(iter) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace picekit
