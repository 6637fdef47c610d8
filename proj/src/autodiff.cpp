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

#include "kbudget/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kbudget {

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << "(" << shape.n << "," << shape.c << "," << shape.h << "," << shape.w << ")";
  return out.str();
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, Eigen::ArrayXd::Zero(shape.size()), requires_grad) {}

Tensor::Tensor(Shape shape, Eigen::ArrayXd values, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
  if (values.size() != shape.size())
    throw ShapeError("tensor values do not match shape " + to_string(shape));
  node_->shape = shape;
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, Eigen::ArrayXd::Constant(1, value), requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on a non-scalar tensor " + to_string(shape()));
  return node_->values(0);
}

Eigen::ArrayXd Tensor::grad() const {
  return has_grad() ? node_->grad : Eigen::ArrayXd::Zero(size());
}

Eigen::Map<RowMatrix> Tensor::item_matrix(Index n) {
  const Shape& s = shape();
  return {node_->values.data() + n * s.c * s.plane(), s.c, s.plane()};
}

Eigen::Map<const RowMatrix> Tensor::item_matrix(Index n) const {
  const Shape& s = shape();
  return {node_->values.data() + n * s.c * s.plane(), s.c, s.plane()};
}

Tensor Tensor::clone(bool requires_grad) const { return Tensor(shape(), values(), requires_grad); }

// Tape

void Tape::record(const Tensor& output, std::span<const Tensor> inputs, Backward fn) {
  (void)inputs;
  output.node_->requires_grad = true;
  records_.push_back({output.node_, std::move(fn)});
}

Eigen::ArrayXd& Tape::grad_of(const Tensor& t) {
  auto& node = *t.node_;
  if (node.grad.size() != node.values.size()) node.grad = Eigen::ArrayXd::Zero(node.values.size());
  return node.grad;
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.size() != 1) throw UsageError("backward root must be a scalar tensor");
  auto it = std::find_if(records_.rbegin(), records_.rend(),
                         [&](const Record& r) { return r.output == root.node_; });
  if (it == records_.rend()) throw UsageError("backward root was not produced on this tape");

  for (auto& r : records_) r.output->grad = Eigen::ArrayXd::Zero(r.output->values.size());
  root.node_->grad(0) = 1.0;
  for (; it != records_.rend(); ++it) it->fn();
}

namespace {

bool wants_grad(Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " differ");
}

// Unrolls 3x3 zero-padded neighbourhoods: row (c*9 + ky*3 + kx), column y*w + x.
void im2col3(const double* x, Index channels, Index h, Index w, double* cols) {
  const Index plane = h * w;
  for (Index c = 0; c < channels; ++c) {
    const double* src = x + c * plane;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        double* row = cols + ((c * 3 + ky) * 3 + kx) * plane;
        const Index dy = ky - 1, dx = kx - 1;
        const Index x0 = std::max<Index>(0, -dx), x1 = std::min<Index>(w, w - dx);
        for (Index y = 0; y < h; ++y) {
          double* dst = row + y * w;
          const Index sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          std::fill(dst, dst + x0, 0.0);
          std::copy(src + sy * w + x0 + dx, src + sy * w + x1 + dx, dst + x0);
          std::fill(dst + x1, dst + w, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col3: scatters column gradients back onto the input.
void col2im3_add(const double* cols, Index channels, Index h, Index w, double* x) {
  const Index plane = h * w;
  for (Index c = 0; c < channels; ++c) {
    double* dst = x + c * plane;
    for (Index ky = 0; ky < 3; ++ky) {
      for (Index kx = 0; kx < 3; ++kx) {
        const double* row = cols + ((c * 3 + ky) * 3 + kx) * plane;
        const Index dy = ky - 1, dx = kx - 1;
        const Index x0 = std::max<Index>(0, -dx), x1 = std::min<Index>(w, w - dx);
        for (Index y = 0; y < h; ++y) {
          const Index sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const double* src = row + y * w;
          double* out = dst + sy * w + dx;
          for (Index xi = x0; xi < x1; ++xi) out[xi] += src[xi];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, Tape* tape) {
  const Shape xs = x.shape(), ws = w.shape();
  if (ws.h != ws.w || (ws.h != 1 && ws.h != 3))
    throw ShapeError("conv2d: kernel must be 1x1 or 3x3, got " + to_string(ws));
  if (ws.c != xs.c)
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
                     std::to_string(ws.c));
  if (b.shape() != Shape{1, ws.n, 1, 1}) throw ShapeError("conv2d: bias must be (1, out, 1, 1)");

  const Index k = ws.h, plane = xs.plane(), depth = xs.c * k * k;
  const Shape ys{xs.n, ws.n, xs.h, xs.w};
  Tensor y(ys);
  const Eigen::Map<const RowMatrix> weights(w.values().data(), ws.n, depth);
  const Eigen::Map<const Eigen::VectorXd> bias(b.values().data(), ws.n);

  RowMatrix cols;
  if (k == 3) cols.resize(depth, plane);
  for (Index n = 0; n < xs.n; ++n) {
    auto out = y.item_matrix(n);
    if (k == 1) {
      out.noalias() = weights * x.item_matrix(n);
    } else {
      im2col3(x.item_matrix(n).data(), xs.c, xs.h, xs.w, cols.data());
      out.noalias() = weights * cols;
    }
    out.colwise() += bias;
  }

  if (wants_grad(tape, {&x, &w, &b})) {
    tape->record(y, std::array{x, w, b}, [x, w, b, y, k, depth, plane]() {
      const Shape xs = x.shape();
      const Eigen::Map<const RowMatrix> weights(w.values().data(), w.shape().n, depth);
      const Eigen::ArrayXd& gy = Tape::grad_of(y);
      RowMatrix cols, gcols;
      if (k == 3) cols.resize(depth, plane);
      for (Index n = 0; n < xs.n; ++n) {
        const Eigen::Map<const RowMatrix> dy(gy.data() + n * w.shape().n * plane, w.shape().n, plane);
        const double* xn = x.values().data() + n * xs.c * plane;
        if (w.requires_grad()) {
          Eigen::Map<RowMatrix> gw(Tape::grad_of(w).data(), w.shape().n, depth);
          if (k == 1) {
            gw.noalias() += dy * Eigen::Map<const RowMatrix>(xn, xs.c, plane).transpose();
          } else {
            im2col3(xn, xs.c, xs.h, xs.w, cols.data());
            gw.noalias() += dy * cols.transpose();
          }
        }
        if (b.requires_grad()) {
          Eigen::Map<Eigen::VectorXd> gb(Tape::grad_of(b).data(), w.shape().n);
          gb += dy.rowwise().sum();
        }
        if (x.requires_grad()) {
          double* gx = Tape::grad_of(x).data() + n * xs.c * plane;
          if (k == 1) {
            Eigen::Map<RowMatrix>(gx, xs.c, plane).noalias() += weights.transpose() * dy;
          } else {
            gcols.noalias() = weights.transpose() * dy;
            col2im3_add(gcols.data(), xs.c, xs.h, xs.w, gx);
          }
        }
      }
    });
  }
  return y;
}

Tensor relu(const Tensor& x, Tape* tape) {
  Tensor y(x.shape(), x.values().max(0.0));
  if (wants_grad(tape, {&x})) {
    tape->record(y, std::array{x}, [x, y]() {
      Tape::grad_of(x) += (x.values() > 0.0).select(Tape::grad_of(y), 0.0);
    });
  }
  return y;
}

Tensor concat_channels(std::span<const Tensor> xs, Tape* tape) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  Shape out = xs.front().shape();
  out.c = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    if (s.n != out.n || s.h != out.h || s.w != out.w)
      throw ShapeError("concat_channels: batch or spatial size mismatch " + to_string(s));
    out.c += s.c;
  }
  Tensor y(out);
  for (Index n = 0; n < out.n; ++n) {
    Index offset = 0;
    auto dst = y.item_matrix(n);
    for (const auto& t : xs) {
      dst.middleRows(offset, t.shape().c) = t.item_matrix(n);
      offset += t.shape().c;
    }
  }
  const bool any = tape != nullptr && std::any_of(xs.begin(), xs.end(), [](const Tensor& t) {
    return t.requires_grad();
  });
  if (any) {
    std::vector<Tensor> inputs(xs.begin(), xs.end());
    tape->record(y, inputs, [inputs, y]() {
      const Eigen::ArrayXd& gy = Tape::grad_of(y);
      const Shape ys = y.shape();
      for (Index n = 0; n < ys.n; ++n) {
        const Eigen::Map<const RowMatrix> dy(gy.data() + n * ys.c * ys.plane(), ys.c, ys.plane());
        Index offset = 0;
        for (const auto& t : inputs) {
          const Index c = t.shape().c;
          if (t.requires_grad()) {
            Eigen::Map<RowMatrix> gx(Tape::grad_of(t).data() + n * c * ys.plane(), c, ys.plane());
            gx += dy.middleRows(offset, c);
          }
          offset += c;
        }
      }
    });
  }
  return y;
}

Tensor add(const Tensor& x, const Tensor& y, Tape* tape) {
  require_same_shape(x, y, "add");
  Tensor z(x.shape(), x.values() + y.values());
  if (wants_grad(tape, {&x, &y})) {
    tape->record(z, std::array{x, y}, [x, y, z]() {
      const Eigen::ArrayXd& gz = Tape::grad_of(z);
      if (x.requires_grad()) Tape::grad_of(x) += gz;
      if (y.requires_grad()) Tape::grad_of(y) += gz;
    });
  }
  return z;
}

Tensor l1_loss(const Tensor& pred, const Tensor& target, Tape* tape) {
  require_same_shape(pred, target, "l1_loss");
  const double count = static_cast<double>(pred.size());
  Tensor loss = Tensor::scalar((pred.values() - target.values()).abs().sum() / count);
  if (wants_grad(tape, {&pred, &target})) {
    tape->record(loss, std::array{pred, target}, [pred, target, loss, count]() {
      const double g = Tape::grad_of(loss)(0) / count;
      const Eigen::ArrayXd sign = (pred.values() - target.values()).sign();
      if (pred.requires_grad()) Tape::grad_of(pred) += g * sign;
      if (target.requires_grad()) Tape::grad_of(target) -= g * sign;
    });
  }
  return loss;
}

void adam_step(std::span<Eigen::ArrayXd> params, std::span<const Eigen::ArrayXd> grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Eigen::ArrayXd::Zero(p.size()));
      state.v.push_back(Eigen::ArrayXd::Zero(p.size()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].size() != grads[i].size() || state.m[i].size() != params[i].size())
      throw ShapeError("adam: shape mismatch in parameter " + std::to_string(i));

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = config.beta1 * m + (1.0 - config.beta1) * grads[i];
    v = config.beta2 * v + (1.0 - config.beta2) * grads[i].square();
    params[i] -= config.lr * (m / correction1) / ((v / correction2).sqrt() + config.epsilon);
  }
}

GradCheck finite_difference_check(const ScalarFunction& f, const Tensor& x, double h,
                                  std::span<const Index> coords, double abs_floor) {
  Tensor probe = x.clone(true);
  Tape tape;
  const Tensor root = f(probe, &tape);
  tape.backward(root);
  const Eigen::ArrayXd analytic = probe.grad();

  std::vector<Index> all;
  if (coords.empty()) {
    all.resize(static_cast<std::size_t>(x.size()));
    for (Index i = 0; i < x.size(); ++i) all[static_cast<std::size_t>(i)] = i;
    coords = all;
  }

  GradCheck result;
  Tensor shifted = x.clone();
  for (Index i : coords) {
    const double original = shifted.values()(i);
    shifted.values()(i) = original + h;
    const double up = f(shifted, nullptr).item();
    shifted.values()(i) = original - h;
    const double down = f(shifted, nullptr).item();
    shifted.values()(i) = original;

    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic(i);
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), abs_floor});
    if (err > result.max_rel_error || result.worst_index < 0) {
      result = {err, i, a, numeric};
    }
  }
  return result;
}

}  // namespace kbudget
