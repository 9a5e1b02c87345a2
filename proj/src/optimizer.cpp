// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/optimizer.hpp"

#include <cmath>

#include "gsr/errors.hpp"
#include "gsr/model.hpp"
#include "gsr/named_array.hpp"

namespace gsr {

double gradient_norm(const std::vector<NamedTensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

ClipResult clip_gradients(std::vector<NamedTensor>& params, double max_norm) {
  ClipResult r;
  r.norm = gradient_norm(params);
  if (max_norm <= 0.0 || r.norm <= max_norm) return r;
  r.scale = max_norm / r.norm;
  for (auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double& g : p.tensor.mutable_grad()) g *= r.scale;
  }
  return r;
}

AdamW::AdamW(std::vector<NamedTensor> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  if (options_.lr < 0.0 || options_.backbone_lr < 0.0 || options_.weight_decay < 0.0) {
    throw ValidationError("optimizer: learning rates and weight decay must be nonnegative");
  }
  if (options_.beta1 < 0.0 || options_.beta1 >= 1.0 || options_.beta2 < 0.0 || options_.beta2 >= 1.0) {
    throw ValidationError("optimizer: betas must lie in [0, 1)");
  }
  for (const auto& p : params_) {
    backbone_.push_back(is_backbone_parameter(p.name));
    state_.m.emplace_back(p.tensor.numel(), 0.0);
    state_.v.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step(double lr_scale) {
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    const double lr = lr_scale * (backbone_[i] ? options_.backbone_lr : options_.lr);
    auto theta = p.mutable_values();
    const bool has = p.has_grad();
    const auto grad = p.grad();
    auto& m = state_.m[i];
    auto& v = state_.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double g = has ? grad[j] : 0.0;
      theta[j] -= lr * options_.weight_decay * theta[j];
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g;
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g * g;
      theta[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + options_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void AdamW::save_state(const std::filesystem::path& path) const {
  std::vector<NamedArray> arrays;
  arrays.push_back({"step", DType::kInt64, {1}, {static_cast<double>(state_.step)}});
  for (std::size_t i = 0; i < params_.size(); ++i) {
    arrays.push_back({"m." + params_[i].name, DType::kFloat64, params_[i].tensor.shape(), state_.m[i]});
    arrays.push_back({"v." + params_[i].name, DType::kFloat64, params_[i].tensor.shape(), state_.v[i]});
  }
  write_named_arrays(path, arrays);
}

void AdamW::load_state(const std::filesystem::path& path) {
  const auto arrays = read_named_arrays(path);
  const auto step = find_array(arrays, "step");
  if (!step || step->values.size() != 1) throw IoError(path.string() + ": missing step");
  OptimizerState s;
  s.step = static_cast<std::size_t>(step->values[0]);
  for (const auto& p : params_) {
    const auto m = find_array(arrays, "m." + p.name);
    const auto v = find_array(arrays, "v." + p.name);
    if (!m || !v || m->shape != p.tensor.shape() || v->shape != p.tensor.shape()) {
      throw IoError(path.string() + ": moments for '" + p.name + "' are missing or misshapen");
    }
    s.m.push_back(m->values);
    s.v.push_back(v->values);
  }
  state_ = std::move(s);
}

}  // namespace gsr
