#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>

#include "quip/parameters.hpp"
#include "quip/tensor.hpp"

namespace quip {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::map<std::string, double> per_parameter_errors;
  std::size_t entries_checked = 0;
  // Set when the loss or a gradient turned out non-finite. The offending
  // parameter is then reported with an infinite error.
  bool fault = false;
  std::string fault_message;

  bool passed(double tolerance) const { return !fault && max_relative_error < tolerance; }
};

// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

// Compares the gradient that backward() assigns to every entry of every
// trainable parameter against the central difference (L(x + eps) - L(x - eps)) / 2eps.
// `loss_fn` must rebuild its graph from the current parameter values on every
// call. Parameter values are restored before returning; gradients are left
// holding the analytic result.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, ParameterSet& params, double eps);

}  // namespace quip
