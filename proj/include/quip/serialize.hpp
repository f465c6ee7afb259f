#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "quip/parameters.hpp"

namespace quip {

// Weight files are plain text:
//
//   quip-weights 1
//   params <count>
//   param <name> <rank> <dim_0> ... <dim_{rank-1}>
//   <value_0> <value_1> ...          (row-major, one line per parameter)
//
// Values use the shortest decimal form that round-trips a 64-bit double, so
// a save/load cycle is exact and identical weights give identical bytes.
struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void write_weights(std::ostream& out, const ParameterSet& params);
void save_weights(const std::filesystem::path& path, const ParameterSet& params);

std::vector<StoredTensor> read_weights(std::istream& in);
std::vector<StoredTensor> load_weights(const std::filesystem::path& path);

// Copies stored values into `params`. Names must match one-to-one and
// shapes must agree; a DimensionError names both shapes otherwise.
void assign_weights(ParameterSet& params, const std::vector<StoredTensor>& stored);

}  // namespace quip
