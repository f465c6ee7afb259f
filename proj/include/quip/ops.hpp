#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "quip/tensor.hpp"

// Differentiable operations. Every op computes its value eagerly and, when
// grad mode is on and an input requires grad, records how to propagate the
// upstream gradient back into its inputs.
namespace quip::ops {

// Element-wise, identical shapes required.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// [m x k] * [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m x k] * [k] -> [m]
Tensor matvec(const Tensor& a, const Tensor& x);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// x for x >= 0, slope * x otherwise.
Tensor leaky_relu(const Tensor& x, double slope);
// Softmax over all entries of a vector.
Tensor softmax(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Contiguous [offset, offset + length) range of a vector.
Tensor slice(const Tensor& v, std::size_t offset, std::size_t length);
// Row `index` of a matrix as a vector.
Tensor row(const Tensor& m, std::size_t index);
// Equal-length vectors stacked into a [rows x cols] matrix.
Tensor stack_rows(std::span<const Tensor> rows);
// Flattened concatenation in argument order.
Tensor concat(std::span<const Tensor> parts);
Tensor reshape(const Tensor& x, Shape shape);

// Row i of the result is scores[i] * m[i, :].
Tensor row_scale(const Tensor& scores, const Tensor& m);

// Valid 1-D convolution along the first axis.
//   input  [n x c_in], kernel [filters x height x c_in], bias [filters]
//   output [(n - height + 1) x filters]
Tensor conv1d_valid(const Tensor& input, const Tensor& kernel, const Tensor& bias);

// Row r of the result is the mean of table rows listed in groups[r]; an
// empty group yields a zero row. Gradient reaches only the listed rows.
Tensor gather_mean_rows(const Tensor& table, const std::vector<std::vector<std::size_t>>& groups);

// Mean binary cross-entropy. Predictions are clamped to [eps, 1 - eps]
// before taking logs; the gradient is evaluated at the clamped value.
inline constexpr double kBceClamp = 1e-12;
Tensor bce(const Tensor& predictions, std::span<const double> labels);

}  // namespace quip::ops
