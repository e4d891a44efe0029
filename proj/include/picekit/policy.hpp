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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "picekit/dynamics.hpp"
#include "picekit/errors.hpp"
#include "picekit/time_grid.hpp"

namespace picekit {

/// State feedback controller u(s, x | theta) with a flat parameter vector and
/// sensitivities of the control output with respect to the parameters.
///
/// Policies are immutable while a batch is being sampled; parameter updates
/// happen between batches (single writer, many readers).
class Policy {
 public:
  virtual ~Policy() = default;

  virtual int control_dim() const = 0;
  virtual std::int64_t param_count() const = 0;
  virtual Vector params() const = 0;
  virtual void set_params(const Vector& theta) = 0;

  /// Control output; writes into `u` (control_dim).
  virtual void evaluate(double time, const Vector& state, Vector& u) const = 0;

  /// acc += scale * (du/dtheta)(time, state) * factor, with factor of length
  /// control_dim and acc of length param_count. This is the hot path for
  /// learning updates; implementations exploit sparsity of the jacobian.
  virtual void accumulate_jacobian(double time, const Vector& state, const Vector& factor,
                                   double scale, Vector& acc) const = 0;

  /// Dense sensitivities du/dtheta, param_count x control_dim.
  virtual Matrix param_jacobian(double time, const Vector& state) const {
    const int m = control_dim();
    Matrix jac = Matrix::Zero(param_count(), m);
    Vector unit = Vector::Zero(m);
    Vector column = Vector::Zero(param_count());
    for (int a = 0; a < m; ++a) {
      unit.setZero();
      unit(a) = 1.0;
      column.setZero();
      accumulate_jacobian(time, state, unit, 1.0, column);
      jac.col(a) = column;
    }
    return jac;
  }

  /// Structural description plus parameters as nested arrays, for checkpoints.
  virtual nlohmann::json describe() const = 0;

  Vector evaluate(double time, const Vector& state) const {
    Vector u(control_dim());
    evaluate(time, state, u);
    return u;
  }
};

/// Controllers that are linear in their parameters over a set of state basis
/// functions: u_a(s, x) = sum_k C_a k(s) h_k(x). The learning module solves
/// for the coefficient matrices in closed form through this interface.
class LinearInBasis {
 public:
  virtual ~LinearInBasis() = default;

  virtual int basis_count() const = 0;
  /// Number of coefficient time slices: 1 for static controllers, otherwise
  /// the number of grid steps.
  virtual std::int64_t slice_count() const = 0;
  virtual void basis_values(const Vector& state, Vector& out) const = 0;
  /// Coefficients of slice j, control_dim x basis_count.
  virtual Matrix slice_coefficients(std::int64_t j) const = 0;
  virtual void set_slice_coefficients(std::int64_t j, const Matrix& coeff) = 0;
};

namespace detail {

inline std::int64_t grid_slice_index(const TimeGrid& grid, double time) {
  const double raw = (time - grid.t0) / grid.dt;
  const double rounded = std::round(raw);
  const std::int64_t j = static_cast<std::int64_t>(rounded);
  if (j < 0 || j >= grid.steps || std::abs(raw - rounded) > 1e-6) {
    throw ConfigError("policy: time " + std::to_string(time) +
                      " has no configured coefficient slice");
  }
  return j;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// The do-nothing controller; useful as the uncontrolled sampling baseline.
class ZeroPolicy final : public Policy {
 public:
  using Policy::evaluate;
  explicit ZeroPolicy(int control_dim) : control_dim_(control_dim) {}

  int control_dim() const override { return control_dim_; }
  std::int64_t param_count() const override { return 0; }
  Vector params() const override { return Vector(0); }
  void set_params(const Vector& theta) override {
    if (theta.size() != 0) throw ConfigError("zero policy has no parameters");
  }
  void evaluate(double, const Vector&, Vector& u) const override {
    u.setZero(control_dim_);
  }
  void accumulate_jacobian(double, const Vector&, const Vector&, double, Vector&) const override {}
  nlohmann::json describe() const override {
    return {{"type", "zero"}, {"control_dim", control_dim_}};
  }

 private:
  int control_dim_;
};

/// Control from an arbitrary function of time and state; has no parameters.
/// Used for analytic reference controllers and fixed sampling controls.
class FunctionPolicy final : public Policy {
 public:
  using Policy::evaluate;
  using Fn = std::function<void(double, const Vector&, Vector&)>;

  FunctionPolicy(int control_dim, Fn fn, std::string label = "function")
      : control_dim_(control_dim), fn_(std::move(fn)), label_(std::move(label)) {}

  int control_dim() const override { return control_dim_; }
  std::int64_t param_count() const override { return 0; }
  Vector params() const override { return Vector(0); }
  void set_params(const Vector& theta) override {
    if (theta.size() != 0) throw ConfigError("function policy has no parameters");
  }
  void evaluate(double time, const Vector& state, Vector& u) const override {
    u.resize(control_dim_);
    fn_(time, state, u);
  }
  void accumulate_jacobian(double, const Vector&, const Vector&, double, Vector&) const override {}
  nlohmann::json describe() const override {
    return {{"type", label_}, {"control_dim", control_dim_}};
  }

 private:
  int control_dim_;
  Fn fn_;
  std::string label_;
};

using BasisFn = std::function<double(const Vector&)>;

/// u(s, x) = C(s) h(x) over user-supplied scalar basis functions h_k, with the
/// coefficient matrix either shared across time (static) or per grid step.
class LinearBasisPolicy final : public Policy, public LinearInBasis {
 public:
  using Policy::evaluate;
  /// Static coefficients (one m x K matrix for all times).
  LinearBasisPolicy(int control_dim, std::vector<BasisFn> bases)
      : control_dim_(control_dim), bases_(std::move(bases)), time_indexed_(false) {
    coeff_.assign(1, Matrix::Zero(control_dim_, basis_count()));
  }

  /// Time-indexed coefficients (one m x K matrix per grid step).
  LinearBasisPolicy(int control_dim, std::vector<BasisFn> bases, TimeGrid grid)
      : control_dim_(control_dim),
        bases_(std::move(bases)),
        time_indexed_(true),
        grid_(grid) {
    coeff_.assign(static_cast<std::size_t>(grid.steps), Matrix::Zero(control_dim_, basis_count()));
  }

  int control_dim() const override { return control_dim_; }
  int basis_count() const override { return static_cast<int>(bases_.size()); }
  std::int64_t slice_count() const override { return static_cast<std::int64_t>(coeff_.size()); }

  std::int64_t param_count() const override {
    return slice_count() * control_dim_ * basis_count();
  }

  Vector params() const override {
    Vector theta(param_count());
    std::int64_t at = 0;
    for (const Matrix& c : coeff_) {
      for (int a = 0; a < control_dim_; ++a) {
        for (int k = 0; k < basis_count(); ++k) theta(at++) = c(a, k);
      }
    }
    return theta;
  }

  void set_params(const Vector& theta) override {
    if (theta.size() != param_count()) {
      throw ConfigError("linear basis policy: parameter vector has wrong length");
    }
    std::int64_t at = 0;
    for (Matrix& c : coeff_) {
      for (int a = 0; a < control_dim_; ++a) {
        for (int k = 0; k < basis_count(); ++k) c(a, k) = theta(at++);
      }
    }
  }

  // Basis values are computed inline; evaluation keeps no shared state so
  // concurrent rollouts stay race free.
  void evaluate(double time, const Vector& state, Vector& u) const override {
    const Matrix& c = coeff_[slice_for(time)];
    u.setZero(control_dim_);
    for (int k = 0; k < basis_count(); ++k) {
      u += bases_[static_cast<std::size_t>(k)](state) * c.col(k);
    }
  }

  void accumulate_jacobian(double time, const Vector& state, const Vector& factor, double scale,
                           Vector& acc) const override {
    const std::int64_t j = slice_for(time);
    const int K = basis_count();
    const std::int64_t base = j * control_dim_ * K;
    for (int k = 0; k < K; ++k) {
      const double h = bases_[static_cast<std::size_t>(k)](state);
      for (int a = 0; a < control_dim_; ++a) {
        acc(base + a * K + k) += scale * factor(a) * h;
      }
    }
  }

  void basis_values(const Vector& state, Vector& out) const override {
    out.resize(basis_count());
    for (int k = 0; k < basis_count(); ++k) out(k) = bases_[static_cast<std::size_t>(k)](state);
  }

  Matrix slice_coefficients(std::int64_t j) const override { return coeff_.at(check_slice(j)); }

  void set_slice_coefficients(std::int64_t j, const Matrix& coeff) override {
    if (coeff.rows() != control_dim_ || coeff.cols() != basis_count()) {
      throw ConfigError("linear basis policy: coefficient matrix has wrong shape");
    }
    coeff_.at(check_slice(j)) = coeff;
  }

  nlohmann::json describe() const override {
    nlohmann::json slices = nlohmann::json::array();
    for (const Matrix& c : coeff_) slices.push_back(detail::matrix_to_json(c));
    return {{"type", time_indexed_ ? "linear_basis_time_indexed" : "linear_basis_static"},
            {"control_dim", control_dim_},
            {"basis_count", basis_count()},
            {"coefficients", std::move(slices)}};
  }

 private:
  std::size_t slice_for(double time) const {
    if (!time_indexed_) return 0;
    return static_cast<std::size_t>(detail::grid_slice_index(grid_, time));
  }

  std::size_t check_slice(std::int64_t j) const {
    if (j < 0 || j >= slice_count()) {
      throw ConfigError("linear basis policy: slice index out of range");
    }
    return static_cast<std::size_t>(time_indexed_ ? j : 0);
  }

  int control_dim_;
  std::vector<BasisFn> bases_;
  bool time_indexed_;
  TimeGrid grid_{};
  std::vector<Matrix> coeff_;
};

/// Axis of a tabular grid controller. Wrapped axes are periodic with period
/// hi - lo; unwrapped axes clamp out-of-box states to the edge cells so the
/// control stays defined when noise pushes a rollout outside the box.
struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 1;
  bool wrap = false;
};

/// Piecewise-constant controller on a box partition of the state space,
/// u(x) = theta_cell(x). Cells are half-open [lo, hi) along each axis.
class TabularGridPolicy final : public Policy, public LinearInBasis {
 public:
  using Policy::evaluate;
  TabularGridPolicy(int control_dim, std::vector<GridAxis> axes)
      : control_dim_(control_dim), axes_(std::move(axes)) {
    cells_ = 1;
    for (const GridAxis& axis : axes_) {
      if (axis.bins < 1 || !(axis.hi > axis.lo)) {
        throw ConfigError("tabular policy: each axis needs bins >= 1 and hi > lo");
      }
      cells_ *= axis.bins;
    }
    table_ = Matrix::Zero(cells_, control_dim_);
  }

  int control_dim() const override { return control_dim_; }
  std::int64_t param_count() const override { return cells_ * control_dim_; }
  std::int64_t cell_count() const { return cells_; }

  Vector params() const override {
    Vector theta(param_count());
    std::int64_t at = 0;
    for (std::int64_t c = 0; c < cells_; ++c) {
      for (int a = 0; a < control_dim_; ++a) theta(at++) = table_(c, a);
    }
    return theta;
  }

  void set_params(const Vector& theta) override {
    if (theta.size() != param_count()) {
      throw ConfigError("tabular policy: parameter vector has wrong length");
    }
    std::int64_t at = 0;
    for (std::int64_t c = 0; c < cells_; ++c) {
      for (int a = 0; a < control_dim_; ++a) table_(c, a) = theta(at++);
    }
  }

  std::int64_t cell_index(const Vector& state) const {
    std::int64_t index = 0;
    for (std::size_t d = 0; d < axes_.size(); ++d) {
      const GridAxis& axis = axes_[d];
      double y = state(static_cast<Eigen::Index>(d));
      if (axis.wrap) {
        const double period = axis.hi - axis.lo;
        y -= period * std::floor((y - axis.lo) / period);  // into [lo, lo + period)
      }
      const double width = (axis.hi - axis.lo) / axis.bins;
      std::int64_t k = static_cast<std::int64_t>(std::floor((y - axis.lo) / width));
      if (k < 0) k = 0;
      if (k >= axis.bins) k = axis.bins - 1;
      index = index * axis.bins + k;
    }
    return index;
  }

  void evaluate(double, const Vector& state, Vector& u) const override {
    u = table_.row(cell_index(state)).transpose();
  }

  void accumulate_jacobian(double, const Vector& state, const Vector& factor, double scale,
                           Vector& acc) const override {
    const std::int64_t base = cell_index(state) * control_dim_;
    for (int a = 0; a < control_dim_; ++a) acc(base + a) += scale * factor(a);
  }

  // Cell indicators form a basis, so the grid controller is linear in theta.
  int basis_count() const override { return static_cast<int>(cells_); }
  std::int64_t slice_count() const override { return 1; }

  void basis_values(const Vector& state, Vector& out) const override {
    out.setZero(cells_);
    out(cell_index(state)) = 1.0;
  }

  Matrix slice_coefficients(std::int64_t) const override { return table_.transpose(); }

  void set_slice_coefficients(std::int64_t, const Matrix& coeff) override {
    if (coeff.rows() != control_dim_ || coeff.cols() != cells_) {
      throw ConfigError("tabular policy: coefficient matrix has wrong shape");
    }
    table_ = coeff.transpose();
  }

  nlohmann::json describe() const override {
    nlohmann::json axes = nlohmann::json::array();
    for (const GridAxis& a : axes_) {
      axes.push_back({{"lo", a.lo}, {"hi", a.hi}, {"bins", a.bins}, {"wrap", a.wrap}});
    }
    return {{"type", "tabular_grid"},
            {"control_dim", control_dim_},
            {"axes", std::move(axes)},
            {"table", detail::matrix_to_json(table_)}};
  }

 private:
  int control_dim_;
  std::vector<GridAxis> axes_;
  std::int64_t cells_ = 0;
  Matrix table_;
};

/// Time-varying affine feedback u(s_j, x) = A_j x + b_j. Equivalent to a
/// time-indexed linear-in-basis controller over the basis {x_1..x_n, 1}.
class AffineFeedbackPolicy final : public Policy, public LinearInBasis {
 public:
  using Policy::evaluate;
  AffineFeedbackPolicy(int control_dim, int state_dim, TimeGrid grid)
      : control_dim_(control_dim), state_dim_(state_dim), grid_(grid) {
    gain_.assign(static_cast<std::size_t>(grid.steps), Matrix::Zero(control_dim_, state_dim_));
    offset_.assign(static_cast<std::size_t>(grid.steps), Vector::Zero(control_dim_));
  }

  int control_dim() const override { return control_dim_; }
  int state_dim() const { return state_dim_; }
  const TimeGrid& grid() const { return grid_; }

  const Matrix& gain(std::int64_t j) const { return gain_.at(static_cast<std::size_t>(j)); }
  const Vector& offset(std::int64_t j) const { return offset_.at(static_cast<std::size_t>(j)); }

  void set_gain(std::int64_t j, const Matrix& A) { gain_.at(static_cast<std::size_t>(j)) = A; }
  void set_offset(std::int64_t j, const Vector& b) { offset_.at(static_cast<std::size_t>(j)) = b; }

  /// When true, closed-form fits keep A frozen at zero (open-loop controller).
  void set_open_loop(bool open_loop) { open_loop_ = open_loop; }
  bool open_loop() const { return open_loop_; }

  std::int64_t param_count() const override {
    return grid_.steps * control_dim_ * (state_dim_ + 1);
  }

  Vector params() const override {
    Vector theta(param_count());
    std::int64_t at = 0;
    for (std::int64_t j = 0; j < grid_.steps; ++j) {
      const Matrix& A = gain_[static_cast<std::size_t>(j)];
      const Vector& b = offset_[static_cast<std::size_t>(j)];
      for (int a = 0; a < control_dim_; ++a) {
        for (int s = 0; s < state_dim_; ++s) theta(at++) = A(a, s);
        theta(at++) = b(a);
      }
    }
    return theta;
  }

  void set_params(const Vector& theta) override {
    if (theta.size() != param_count()) {
      throw ConfigError("affine policy: parameter vector has wrong length");
    }
    std::int64_t at = 0;
    for (std::int64_t j = 0; j < grid_.steps; ++j) {
      Matrix& A = gain_[static_cast<std::size_t>(j)];
      Vector& b = offset_[static_cast<std::size_t>(j)];
      for (int a = 0; a < control_dim_; ++a) {
        for (int s = 0; s < state_dim_; ++s) A(a, s) = theta(at++);
        b(a) = theta(at++);
      }
    }
  }

  void evaluate(double time, const Vector& state, Vector& u) const override {
    const std::size_t j = static_cast<std::size_t>(detail::grid_slice_index(grid_, time));
    u.noalias() = gain_[j] * state;
    u += offset_[j];
  }

  void accumulate_jacobian(double time, const Vector& state, const Vector& factor, double scale,
                           Vector& acc) const override {
    const std::int64_t j = detail::grid_slice_index(grid_, time);
    std::int64_t at = j * control_dim_ * (state_dim_ + 1);
    for (int a = 0; a < control_dim_; ++a) {
      const double fa = scale * factor(a);
      for (int s = 0; s < state_dim_; ++s) acc(at++) += fa * state(s);
      acc(at++) += fa;
    }
  }

  // Basis view: {x_1..x_n, 1}; slice coefficients are [A | b].
  int basis_count() const override { return state_dim_ + 1; }
  std::int64_t slice_count() const override { return grid_.steps; }

  void basis_values(const Vector& state, Vector& out) const override {
    out.resize(state_dim_ + 1);
    out.head(state_dim_) = state;
    out(state_dim_) = 1.0;
  }

  Matrix slice_coefficients(std::int64_t j) const override {
    Matrix c(control_dim_, state_dim_ + 1);
    c.leftCols(state_dim_) = gain_.at(static_cast<std::size_t>(j));
    c.col(state_dim_) = offset_.at(static_cast<std::size_t>(j));
    return c;
  }

  void set_slice_coefficients(std::int64_t j, const Matrix& coeff) override {
    if (coeff.rows() != control_dim_ || coeff.cols() != state_dim_ + 1) {
      throw ConfigError("affine policy: coefficient matrix has wrong shape");
    }
    gain_.at(static_cast<std::size_t>(j)) = coeff.leftCols(state_dim_);
    offset_.at(static_cast<std::size_t>(j)) = coeff.col(state_dim_);
  }

  nlohmann::json describe() const override {
    nlohmann::json slices = nlohmann::json::array();
    for (std::int64_t j = 0; j < grid_.steps; ++j) {
      slices.push_back({{"time", grid_.time(j)},
                        {"A", detail::matrix_to_json(gain_[static_cast<std::size_t>(j)])},
                        {"b", detail::matrix_to_json(offset_[static_cast<std::size_t>(j)])}});
    }
    return {{"type", "affine_feedback"},
            {"control_dim", control_dim_},
            {"state_dim", state_dim_},
            {"slices", std::move(slices)}};
  }

 private:
  int control_dim_;
  int state_dim_;
  TimeGrid grid_;
  std::vector<Matrix> gain_;
  std::vector<Vector> offset_;
  bool open_loop_ = false;
};

}  // namespace picekit
