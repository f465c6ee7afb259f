#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "quip/attention.hpp"
#include "quip/random.hpp"
#include "quip/tensor.hpp"

namespace quip {

inline constexpr double kDefaultLeakySlope = 0.3;

// x for x >= 0, slope * x for x < 0.
Tensor leaky_relu(const Tensor& x, double slope);

struct ConvLayerParams {
  Tensor kernel;  // [filters x height x in_channels]
  Tensor bias;    // [filters]

  std::size_t filters() const { return kernel.dim(0); }
  std::size_t height() const { return kernel.dim(1); }
};

// Stack of valid convolutions along the token axis, each followed by
// LeakyReLU; the last layer's output is flattened row-major.
struct CnnBlockParams {
  std::vector<ConvLayerParams> layers;

  // Glorot-uniform kernels (fans height * in_channels and height * filters), zero biases.
  static CnnBlockParams init(std::size_t in_channels, std::span<const std::size_t> filters,
                             std::span<const std::size_t> heights, Rng& rng);

  // Shortest sequence every layer can still slide over.
  std::size_t min_length() const;
  std::size_t output_rows(std::size_t n) const;
  std::size_t flat_length(std::size_t n) const;
};

Tensor cnn_block(const Tensor& seq, const CnnBlockParams& params, double slope);

// Dense hidden layer with LeakyReLU, then a single sigmoid unit.
struct HeadParams {
  Tensor dense_weight;  // [width x input]
  Tensor dense_bias;    // [width]
  Tensor out_weight;    // [1 x width]
  Tensor out_bias;      // [1]

  // Glorot-uniform weights, zero biases.
  static HeadParams init(std::size_t input, std::size_t width, Rng& rng);
};

// F1..F4 in block order, and their concatenation p.
struct FeatureBundle {
  std::array<Tensor, 4> blocks;
  Tensor p;
};

struct Classification {
  FeatureBundle features;
  Tensor prediction;  // scalar in (0, 1)
};

// Block inputs in order: comment_on_reply_fwd, comment_on_reply_bwd,
// reply_on_comment_fwd, reply_on_comment_bwd.
Classification classify(const ContextualizedStates& states, std::span<const CnnBlockParams, 4> cnn,
                        const HeadParams& head, double slope);

// Mean binary cross-entropy with predictions clamped to [1e-12, 1 - 1e-12].
Tensor bce_loss(const Tensor& predictions, std::span<const double> labels);

}  // namespace quip
