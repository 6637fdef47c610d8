/*
 * Copyright 2026 The kbudget Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Reverse-mode differentiation over dense NCHW tensors.
//
// A Tensor is a shared handle to a node holding values and, after a backward
// pass, gradients. Operations take an optional Tape; when a tape is given and
// any input requires gradients, the operation records a closure that
// propagates the output gradient into its inputs. Tape::backward replays the
// closures in reverse order from a scalar root.

#include "kbudget/core.hpp"

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace kbudget {

struct Shape {
  Index n = 1, c = 1, h = 1, w = 1;

  Index size() const { return n * c * h * w; }
  Index plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {
struct TensorNode {
  Shape shape;
  Eigen::ArrayXd values;
  Eigen::ArrayXd grad;  // empty until a backward pass touches the node
  bool requires_grad = false;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, Eigen::ArrayXd values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index size() const { return node_->shape.size(); }

  Eigen::ArrayXd& values() { return node_->values; }
  const Eigen::ArrayXd& values() const { return node_->values; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return node_->grad.size() == node_->values.size(); }
  /// Gradient, or zeros when none has been accumulated.
  Eigen::ArrayXd grad() const;
  void zero_grad() { node_->grad.resize(0); }

  /// (channels, H*W) view of batch item `n`.
  Eigen::Map<RowMatrix> item_matrix(Index n);
  Eigen::Map<const RowMatrix> item_matrix(Index n) const;

  /// Deep copy of the values, detached from any tape.
  Tensor clone(bool requires_grad = false) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
  friend class Tape;
};

/// Ordered record of primitive applications.
class Tape {
 public:
  using Backward = std::function<void()>;

  /// Registers `output` as produced from `inputs`; `fn` reads the output
  /// gradient (see grad_of) and accumulates into input gradients.
  void record(const Tensor& output, std::span<const Tensor> inputs, Backward fn);

  /// Reverse accumulation from a scalar root produced on this tape. Gradients
  /// of leaves accumulate across calls; intermediate gradients are reset.
  void backward(const Tensor& root);

  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  /// Gradient buffer of a tensor, allocated as zeros on first use.
  static Eigen::ArrayXd& grad_of(const Tensor& t);

 private:
  struct Record {
    std::shared_ptr<detail::TensorNode> output;
    Backward fn;
  };
  std::vector<Record> records_;
};

// Primitives. `tape` may be null for inference.

/// Same-padded cross-correlation. w: (out, in, k, k) with k in {1, 3};
/// b: (1, out, 1, 1).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Tape* tape = nullptr);

Tensor relu(const Tensor& x, Tape* tape = nullptr);

/// Channel concatenation in argument order.
Tensor concat_channels(std::span<const Tensor> xs, Tape* tape = nullptr);

Tensor add(const Tensor& x, const Tensor& y, Tape* tape = nullptr);

/// Mean absolute difference as a (1,1,1,1) tensor.
Tensor l1_loss(const Tensor& pred, const Tensor& target, Tape* tape = nullptr);

// Adam.

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<Eigen::ArrayXd> params, std::span<const Eigen::ArrayXd> grads,
               AdamState& state, const AdamConfig& config = {});

// Finite-difference gradient check.

struct GradCheck {
  double max_rel_error = 0.0;
  Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Scalar-valued function of one tensor; must record onto `tape` when given.
using ScalarFunction = std::function<Tensor(const Tensor& x, Tape* tape)>;

/// Compares the reverse-mode gradient of f at x against central differences.
/// The relative error of a coordinate is |a - n| / max(|a|, |n|, abs_floor).
/// When `coords` is non-empty only those coordinates are checked.
GradCheck finite_difference_check(const ScalarFunction& f, const Tensor& x, double h = 1e-6,
                                  std::span<const Index> coords = {}, double abs_floor = 1e-8);

}  // namespace kbudget
