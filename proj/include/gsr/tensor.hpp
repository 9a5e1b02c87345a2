// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with tape-free reverse-mode differentiation.
// Each result holds references to its parents and a closure that pushes its
// gradient back into them; backward() walks the graph in reverse topological
// order. All values are float64.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gsr/rng.hpp"

namespace gsr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  /// Direct write access; only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  bool has_grad() const { return !node_->grad.empty(); }

  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }

  double item() const;
  double operator[](std::size_t flat_index) const { return node_->value[flat_index]; }
  double at(std::size_t row, std::size_t col) const;

  void zero_grad();

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate across
  /// calls; intermediate gradients are reset on every call.
  void backward() const;

  /// Deep copy of the values into a fresh leaf with the same requires_grad.
  Tensor clone() const;
  /// Same values, cut from the graph.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph construction on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Elementwise (identical shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

/// a[..., j] + bias[j] for a bias vector matching the last extent.
Tensor add_bias(const Tensor& a, const Tensor& bias);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

/// [m x k] . [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
/// Rows of a 2-D table selected by index (repeats allowed).
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& rows);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Reduction over one axis; the axis is removed from the shape.
Tensor sum(const Tensor& a, std::size_t axis);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

/// Normalizes over the last extent, then applies gain and bias of that extent.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Inverted dropout: survivors are scaled by 1/(1-rate); identity when
/// `train` is false or rate is zero.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool train);

/// -sum_k target_k log softmax(logits)_k for a single logit vector.
Tensor cross_entropy(const Tensor& logits, std::span<const double> target);

/// Row-wise cross entropy for [m x K] logits against [m x K] targets -> [m].
Tensor cross_entropy_rows(const Tensor& logits, std::span<const double> targets);

inline constexpr double kProbabilityClamp = 1e-7;

/// Two-outcome cross entropy on probabilities clamped to [1e-7, 1 - 1e-7].
/// `p` may have any shape; `targets` has one {0,1} entry per element.
/// Returns a tensor shaped like `p`.
Tensor binary_cross_entropy(const Tensor& p, std::span<const double> targets);
Tensor binary_cross_entropy(const Tensor& p, double target);

}  // namespace gsr
