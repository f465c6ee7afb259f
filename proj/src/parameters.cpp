#include "quip/parameters.hpp"

#include <algorithm>

#include "quip/errors.hpp"

namespace quip {

void ParameterSet::add(std::string name, Tensor tensor, bool weight_decay) {
  if (!tensor.defined() || !tensor.is_leaf()) throw ContractError("parameter '" + name + "' must be a leaf tensor");
  const bool duplicate =
      std::any_of(items_.begin(), items_.end(), [&](const NamedParameter& p) { return p.name == name; });
  if (duplicate) throw ContractError("duplicate parameter name '" + name + "'");
  items_.push_back({std::move(name), std::move(tensor), weight_decay});
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : items_) total += p.tensor.size();
  return total;
}

const NamedParameter& ParameterSet::find(const std::string& name) const {
  for (const auto& p : items_) {
    if (p.name == name) return p;
  }
  throw ContractError("no parameter named '" + name + "'");
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> ParameterSet::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void ParameterSet::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != items_.size()) throw ContractError("restore: snapshot has a different parameter count");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto dst = items_[i].tensor.mutable_values();
    if (values[i].size() != dst.size()) {
      throw DimensionError("restore: size mismatch for parameter '" + items_[i].name + "'");
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace quip
