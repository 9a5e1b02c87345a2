// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "gsr/errors.hpp"

namespace gsr {

using detail::Node;

namespace {

thread_local bool t_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

void check_finite(const char* op, const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::initializer_list<const Tensor*> parents,
                   std::function<void(Node&)> backward) {
  check_finite(op, value);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->is_leaf = false;
  bool needs = false;
  if (t_grad_enabled) {
    for (const Tensor* p : parents) needs = needs || p->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor* p : parents) node->parents.push_back(p->node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor make_result_n(const char* op, Shape shape, std::vector<double> value,
                     const std::vector<Tensor>& parents, std::function<void(Node&)> backward) {
  check_finite(op, value);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->is_leaf = false;
  bool needs = false;
  if (t_grad_enabled) {
    for (const Tensor& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Accumulates `contribution(i)` into parent k's gradient when it tracks one.
template <typename F>
void accumulate(Node& self, std::size_t k, F&& contribution) {
  Node& parent = *self.parents[k];
  if (!parent.requires_grad) return;
  auto& g = parent.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += contribution(i);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  require(axis < shape.size(), "axis " + std::to_string(axis) + " out of range for " + shape_string(shape));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

template <typename Fwd, typename Bwd>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, Bwd dfdx) {
  std::vector<double> out(a.numel());
  const auto x = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  return make_result(op, a.shape(), std::move(out), {&a}, [dfdx](Node& self) {
    const auto& xv = self.parents[0]->value;
    accumulate(self, 0, [&](std::size_t i) { return self.grad[i] * dfdx(xv[i], self.value[i]); });
  });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  require(shape_numel(shape) == values.size(),
          "tensor shape " + shape_string(shape) + " does not hold " + std::to_string(values.size()) + " values");
  check_finite("constructor", values);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

double Tensor::item() const {
  require(numel() == 1, "item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  require(rank() == 2, "at(row, col) needs a 2-D tensor");
  return node_->value[row * node_->shape[1] + col];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  node->requires_grad = node_->requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() requires a scalar, got " + shape_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf) n->grad.assign(n->value.size(), 0.0);
  }
  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf && n->backward) n->backward(*n);
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result("add", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
    accumulate(self, 1, [&](std::size_t i) { return self.grad[i]; });
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result("sub", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
    accumulate(self, 1, [&](std::size_t i) { return -self.grad[i]; });
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result("mul", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    accumulate(self, 0, [&](std::size_t i) { return self.grad[i] * bv[i]; });
    accumulate(self, 1, [&](std::size_t i) { return self.grad[i] * av[i]; });
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / b[i];
  return make_result("div", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& bv = self.parents[1]->value;
    accumulate(self, 0, [&](std::size_t i) { return self.grad[i] / bv[i]; });
    accumulate(self, 1, [&](std::size_t i) { return -self.grad[i] * self.value[i] / bv[i]; });
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same_shape("minimum", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(a[i], b[i]);
  return make_result("minimum", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    accumulate(self, 0, [&](std::size_t i) { return av[i] <= bv[i] ? self.grad[i] : 0.0; });
    accumulate(self, 1, [&](std::size_t i) { return av[i] <= bv[i] ? 0.0 : self.grad[i]; });
  });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  require_same_shape("maximum", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a[i], b[i]);
  return make_result("maximum", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    accumulate(self, 0, [&](std::size_t i) { return av[i] >= bv[i] ? self.grad[i] : 0.0; });
    accumulate(self, 1, [&](std::size_t i) { return av[i] >= bv[i] ? 0.0 : self.grad[i]; });
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  require(a.rank() >= 1 && bias.rank() == 1 && bias.dim(0) == a.dim(a.rank() - 1),
          "add_bias: bias " + shape_string(bias.shape()) + " does not match " + shape_string(a.shape()));
  const std::size_t d = bias.dim(0);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + bias[i % d];
  return make_result("add_bias", a.shape(), std::move(out), {&a, &bias}, [d](Node& self) {
    accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
    Node& b = *self.parents[1];
    if (b.requires_grad) {
      auto& g = b.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % d] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return x * factor; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary("add_scalar", a, [offset](double x) { return x + offset; },
               [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
  return unary("abs", a, [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return make_result("matmul", {m, n}, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    Node& an = *self.parents[0];
    Node& bn = *self.parents[1];
    const double* g = self.grad.data();
    if (an.requires_grad) {
      // dA = G . B^T
      auto& ga = an.grad_buffer();
      const double* bv = bn.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* brow = bv + p * n;
          const double* grow = g + i * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (bn.requires_grad) {
      // dB = A^T . G
      auto& gb = bn.grad_buffer();
      const double* av = an.value.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          double* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose needs a 2-D tensor, got " + shape_string(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return make_result("transpose", {c, r}, std::move(out), {&a}, [r, c](Node& self) {
    accumulate(self, 0, [&](std::size_t idx) {
      const std::size_t i = idx / c, j = idx % c;
      return self.grad[j * r + i];
    });
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(),
          "reshape: " + shape_string(a.shape()) + " cannot become " + shape_string(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result("reshape", std::move(shape), std::move(out), {&a}, [](Node& self) {
    accumulate(self, 0, [&](std::size_t i) { return self.grad[i]; });
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat of zero tensors");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    require(p.rank() == first.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (i != axis) require(p.dim(i) == first[i], "concat: extent mismatch " + shape_string(p.shape()) + " vs " + shape_string(first));
    }
    out_shape[axis] += p.dim(axis);
  }
  const AxisView ov = axis_view(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t ext = p.dim(axis);
    const auto v = p.values();
    for (std::size_t o = 0; o < ov.outer; ++o)
      for (std::size_t e = 0; e < ext; ++e)
        for (std::size_t in = 0; in < ov.inner; ++in)
          out[(o * ov.extent + offset + e) * ov.inner + in] = v[(o * ext + e) * ov.inner + in];
    offset += ext;
  }
  return make_result_n("concat", out_shape, std::move(out), parts, [ov, offsets, axis](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      const std::size_t ext = p.shape[axis];
      for (std::size_t o = 0; o < ov.outer; ++o)
        for (std::size_t e = 0; e < ext; ++e)
          for (std::size_t in = 0; in < ov.inner; ++in)
            g[(o * ext + e) * ov.inner + in] += self.grad[(o * ov.extent + offsets[k] + e) * ov.inner + in];
    }
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisView v = axis_view(a.shape(), axis);
  require(start + length <= v.extent, "slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                          ") exceeds extent of " + shape_string(a.shape()));
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  std::vector<double> out(shape_numel(out_shape));
  const auto av = a.values();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < length; ++e)
      for (std::size_t in = 0; in < v.inner; ++in)
        out[(o * length + e) * v.inner + in] = av[(o * v.extent + start + e) * v.inner + in];
  return make_result("slice", out_shape, std::move(out), {&a}, [v, start, length](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t e = 0; e < length; ++e)
        for (std::size_t in = 0; in < v.inner; ++in)
          g[(o * v.extent + start + e) * v.inner + in] += self.grad[(o * length + e) * v.inner + in];
  });
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& rows) {
  require(table.rank() == 2, "gather_rows needs a 2-D table");
  const std::size_t n = table.dim(0), d = table.dim(1);
  std::vector<double> out(rows.size() * d);
  const auto tv = table.values();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < n, "gather_rows: index " + std::to_string(rows[r]) + " out of " + std::to_string(n));
    std::copy_n(tv.begin() + rows[r] * d, d, out.begin() + r * d);
  }
  return make_result("gather_rows", {rows.size(), d}, std::move(out), {&table}, [rows, d](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) g[rows[r] * d + j] += self.grad[r * d + j];
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_result("sum", {}, {total}, {&a}, [](Node& self) {
    const double g = self.grad[0];
    accumulate(self, 0, [g](std::size_t) { return g; });
  });
}

Tensor mean(const Tensor& a) {
  require(a.numel() > 0, "mean of empty tensor");
  const double n = static_cast<double>(a.numel());
  double total = 0.0;
  for (double v : a.values()) total += v;
  return make_result("mean", {}, {total / n}, {&a}, [n](Node& self) {
    const double g = self.grad[0] / n;
    accumulate(self, 0, [g](std::size_t) { return g; });
  });
}

Tensor sum(const Tensor& a, std::size_t axis) {
  const AxisView v = axis_view(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(v.outer * v.inner, 0.0);
  const auto av = a.values();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      for (std::size_t in = 0; in < v.inner; ++in) out[o * v.inner + in] += av[(o * v.extent + e) * v.inner + in];
  return make_result("sum_axis", out_shape, std::move(out), {&a}, [v](Node& self) {
    accumulate(self, 0, [&](std::size_t idx) {
      const std::size_t in = idx % v.inner;
      const std::size_t o = idx / (v.inner * v.extent);
      return self.grad[o * v.inner + in];
    });
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis);
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      auto idx = [&](std::size_t e) { return (o * v.extent + e) * v.inner + in; };
      double mx = xv[idx(0)];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, xv[idx(e)]);
      double total = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        out[idx(e)] = std::exp(xv[idx(e)] - mx);
        total += out[idx(e)];
      }
      for (std::size_t e = 0; e < v.extent; ++e) out[idx(e)] /= total;
    }
  }
  return make_result("softmax", x.shape(), std::move(out), {&x}, [v](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        auto idx = [&](std::size_t e) { return (o * v.extent + e) * v.inner + in; };
        double dot = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) dot += self.grad[idx(e)] * self.value[idx(e)];
        for (std::size_t e = 0; e < v.extent; ++e) g[idx(e)] += self.value[idx(e)] * (self.grad[idx(e)] - dot);
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const AxisView v = axis_view(x.shape(), axis);
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      auto idx = [&](std::size_t e) { return (o * v.extent + e) * v.inner + in; };
      double mx = xv[idx(0)];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, xv[idx(e)]);
      double total = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) total += std::exp(xv[idx(e)] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t e = 0; e < v.extent; ++e) out[idx(e)] = xv[idx(e)] - lse;
    }
  }
  return make_result("log_softmax", x.shape(), std::move(out), {&x}, [v](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        auto idx = [&](std::size_t e) { return (o * v.extent + e) * v.inner + in; };
        double total = 0.0;
        for (std::size_t e = 0; e < v.extent; ++e) total += self.grad[idx(e)];
        for (std::size_t e = 0; e < v.extent; ++e)
          g[idx(e)] += self.grad[idx(e)] - std::exp(self.value[idx(e)]) * total;
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require(x.rank() >= 1, "layer_norm on a scalar");
  const std::size_t d = x.dim(x.rank() - 1);
  require(gain.rank() == 1 && bias.rank() == 1 && gain.dim(0) == d && bias.dim(0) == d,
          "layer_norm: gain/bias extent does not match last extent of " + shape_string(x.shape()));
  const std::size_t rows = x.numel() / d;
  std::vector<double> normalized(x.numel());
  std::vector<double> inv_std(rows);
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      normalized[r * d + j] = (row[j] - mu) * inv_std[r];
      out[r * d + j] = normalized[r * d + j] * gain[j] + bias[j];
    }
  }
  return make_result(
      "layer_norm", x.shape(), std::move(out), {&x, &gain, &bias},
      [d, rows, normalized = std::move(normalized), inv_std = std::move(inv_std)](Node& self) {
        Node& xn = *self.parents[0];
        Node& gn = *self.parents[1];
        Node& bn = *self.parents[2];
        const auto& gamma = gn.value;
        if (xn.requires_grad) {
          auto& gx = xn.grad_buffer();
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dy = self.grad[r * d + j] * gamma[j];
              sum_dy += dy;
              sum_dy_xhat += dy * normalized[r * d + j];
            }
            for (std::size_t j = 0; j < d; ++j) {
              const double dy = self.grad[r * d + j] * gamma[j];
              gx[r * d + j] += inv_std[r] * (dy - inv_d * sum_dy - normalized[r * d + j] * inv_d * sum_dy_xhat);
            }
          }
        }
        if (gn.requires_grad) {
          auto& gg = gn.grad_buffer();
          for (std::size_t i = 0; i < self.grad.size(); ++i) gg[i % d] += self.grad[i] * normalized[i];
        }
        if (bn.requires_grad) {
          auto& gb = bn.grad_buffer();
          for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % d] += self.grad[i];
        }
      });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = x[i] * mask[i];
  }
  return make_result("dropout", x.shape(), std::move(out), {&x}, [mask = std::move(mask)](Node& self) {
    accumulate(self, 0, [&](std::size_t i) { return self.grad[i] * mask[i]; });
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const double> target) {
  require(logits.numel() == target.size(), "cross_entropy: " + std::to_string(target.size()) +
                                               " targets for " + shape_string(logits.shape()) + " logits");
  Tensor row = reshape(logits, {1, logits.numel()});
  return reshape(cross_entropy_rows(row, target), {});
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const double> targets) {
  require(logits.rank() == 2 && targets.size() == logits.numel(),
          "cross_entropy_rows: targets do not match " + shape_string(logits.shape()));
  const std::size_t m = logits.dim(0), k = logits.dim(1);
  for (std::size_t r = 0; r < m; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += targets[r * k + j];
    if (std::fabs(total - 1.0) > 1e-9) {
      throw ValidationError("cross_entropy: target row " + std::to_string(r) + " sums to " + std::to_string(total));
    }
  }
  std::vector<double> target_copy(targets.begin(), targets.end());
  std::vector<double> probs(m * k);
  std::vector<double> out(m, 0.0);
  const auto z = logits.values();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = z.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < k; ++j) {
      probs[r * k + j] = std::exp(row[j] - lse);
      if (target_copy[r * k + j] != 0.0) out[r] -= target_copy[r * k + j] * (row[j] - lse);
    }
  }
  return make_result("cross_entropy", {m}, std::move(out), {&logits},
                     [k, probs = std::move(probs), t = std::move(target_copy)](Node& self) {
                       accumulate(self, 0, [&](std::size_t i) { return self.grad[i / k] * (probs[i] - t[i]); });
                     });
}

Tensor binary_cross_entropy(const Tensor& p, std::span<const double> targets) {
  require(targets.size() == p.numel(), "binary_cross_entropy: target count mismatch");
  std::vector<double> t(targets.begin(), targets.end());
  std::vector<double> out(p.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double q = std::clamp(p[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    out[i] = -t[i] * std::log(q) - (1.0 - t[i]) * std::log(1.0 - q);
  }
  return make_result("binary_cross_entropy", p.shape(), std::move(out), {&p}, [t = std::move(t)](Node& self) {
    const auto& pv = self.parents[0]->value;
    accumulate(self, 0, [&](std::size_t i) {
      // Zero gradient where the clamp is active.
      if (pv[i] < kProbabilityClamp || pv[i] > 1.0 - kProbabilityClamp) return 0.0;
      return self.grad[i] * (-t[i] / pv[i] + (1.0 - t[i]) / (1.0 - pv[i]));
    });
  });
}

Tensor binary_cross_entropy(const Tensor& p, double target) {
  std::vector<double> t(p.numel(), target);
  return binary_cross_entropy(p, t);
}

}  // namespace gsr
