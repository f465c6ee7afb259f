#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "quip/tensor.hpp"

namespace quip {

struct NamedParameter {
  std::string name;
  Tensor tensor;
  // Receives the L2 penalty during optimization.
  bool weight_decay = false;
};

// Ordered registry of trainable tensors. Order is part of the serialized
// format and of optimizer state layout, so it never changes after setup.
class ParameterSet {
 public:
  void add(std::string name, Tensor tensor, bool weight_decay = false);

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t scalar_count() const;
  const NamedParameter& operator[](std::size_t i) const { return items_[i]; }
  NamedParameter& operator[](std::size_t i) { return items_[i]; }
  // Throws ContractError when `name` is unknown.
  const NamedParameter& find(const std::string& name) const;

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void zero_grad();
  // Deep copy of every value, for snapshot/restore.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<NamedParameter> items_;
};

}  // namespace quip
