// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gsr/tensor.hpp"

namespace gsr {

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t entries_checked = 0;
  std::string worst_entry;  // "<input index>[<flat index>]"
  bool passed = false;
};

/// Compares analytic gradients with central differences.
///
/// `f` must rebuild its graph from the current values of `inputs` on every
/// call and return a scalar. Each input entry is perturbed by +-h in place.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor);
/// the floor keeps entries whose true gradient is zero from reporting
/// round-off noise as relative error.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double h = 1e-5,
                           double tol = 1e-4, double floor = 1e-6);

}  // namespace gsr
