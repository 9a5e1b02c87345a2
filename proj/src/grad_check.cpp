// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "gsr/errors.hpp"

namespace gsr {

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double h, double tol,
                           double floor) {
  for (Tensor& t : inputs) t.zero_grad();
  const Tensor loss = f();
  if (loss.numel() != 1) throw ShapeError("grad_check: function is not scalar-valued");
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (Tensor& t : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + h;
      const double plus = f().item();
      values[i] = original - h;
      const double minus = f().item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[k][i];
      const double abs_err = std::fabs(a - numeric);
      const double rel_err = abs_err / std::max({std::fabs(a), std::fabs(numeric), floor});
      report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
      if (rel_err > report.max_relative_error || report.entries_checked == 0) {
        report.max_relative_error = std::max(report.max_relative_error, rel_err);
        report.worst_entry = std::to_string(k) + "[" + std::to_string(i) + "]";
      }
      ++report.entries_checked;
    }
  }
  report.passed = report.max_relative_error < tol;
  return report;
}

}  // namespace gsr
