#include "quip/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quip/errors.hpp"

namespace quip {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn, ParameterSet& params, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw ContractError("finite_diff_check: eps must lie in [1e-7, 1e-3]");

  GradCheckReport report;
  auto mark_fault = [&report](const std::string& name, std::string message) {
    report.fault = true;
    report.fault_message = std::move(message);
    report.per_parameter_errors[name] = std::numeric_limits<double>::infinity();
    report.max_relative_error = std::numeric_limits<double>::infinity();
    report.worst_parameter = name;
  };

  params.zero_grad();
  const Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) {
    mark_fault("<loss>", "loss is not finite at the unperturbed point");
    return report;
  }
  backward(loss);

  for (auto& param : params) {
    if (!param.tensor.requires_grad()) continue;
    const std::vector<double> analytic = param.tensor.grad();
    if (!std::all_of(analytic.begin(), analytic.end(), [](double g) { return std::isfinite(g); })) {
      mark_fault(param.name, "non-finite analytic gradient in '" + param.name + "'");
      return report;
    }
    auto values = param.tensor.mutable_values();
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double up = loss_fn().item();
      values[i] = original - eps;
      const double down = loss_fn().item();
      values[i] = original;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        mark_fault(param.name, "non-finite loss while perturbing '" + param.name + "' entry " + std::to_string(i));
        return report;
      }
      const double numeric = (up - down) / (2.0 * eps);
      worst = std::max(worst, relative_error(analytic[i], numeric));
      ++report.entries_checked;
    }
    report.per_parameter_errors[param.name] = worst;
    if (report.worst_parameter.empty() || worst > report.max_relative_error) {
      report.max_relative_error = worst;
      report.worst_parameter = param.name;
    }
  }
  return report;
}

}  // namespace quip
