#include "quip/head.hpp"

#include <cmath>

#include "quip/errors.hpp"
#include "quip/ops.hpp"

namespace quip {

namespace {
Tensor uniform_parameter(Shape shape, double bound, Rng& rng) {
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::parameter(std::move(shape), std::move(values));
}

Tensor zero_parameter(Shape shape) {
  const std::size_t n = shape_size(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, 0.0));
}
}  // namespace

Tensor leaky_relu(const Tensor& x, double slope) { return ops::leaky_relu(x, slope); }

CnnBlockParams CnnBlockParams::init(std::size_t in_channels, std::span<const std::size_t> filters,
                                    std::span<const std::size_t> heights, Rng& rng) {
  if (filters.empty() || filters.size() != heights.size()) {
    throw ConfigError("CNN block needs matching, non-empty filter and height lists");
  }
  CnnBlockParams block;
  std::size_t channels = in_channels;
  for (std::size_t l = 0; l < filters.size(); ++l) {
    if (filters[l] == 0 || heights[l] == 0) throw ConfigError("CNN filters and heights must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(heights[l] * (channels + filters[l])));
    block.layers.push_back({uniform_parameter({filters[l], heights[l], channels}, bound, rng), zero_parameter({filters[l]})});
    channels = filters[l];
  }
  return block;
}

std::size_t CnnBlockParams::min_length() const {
  std::size_t shrink = 0;
  for (const auto& layer : layers) shrink += layer.height() - 1;
  return shrink + 1;
}

std::size_t CnnBlockParams::output_rows(std::size_t n) const { return n + 1 - min_length(); }

std::size_t CnnBlockParams::flat_length(std::size_t n) const { return output_rows(n) * layers.back().filters(); }

Tensor cnn_block(const Tensor& seq, const CnnBlockParams& params, double slope) {
  if (params.layers.empty()) throw ContractError("cnn_block: no layers");
  if (seq.rank() != 2) throw DimensionError("cnn_block: expected [n x d], got " + shape_string(seq.shape()));
  if (seq.dim(0) < params.min_length()) {
    throw ContractError("cnn_block: sequence length " + std::to_string(seq.dim(0)) + " is below the minimum " +
                        std::to_string(params.min_length()));
  }
  Tensor x = seq;
  for (const auto& layer : params.layers) x = ops::leaky_relu(ops::conv1d_valid(x, layer.kernel, layer.bias), slope);
  return ops::reshape(x, {x.size()});
}

HeadParams HeadParams::init(std::size_t input, std::size_t width, Rng& rng) {
  if (input == 0 || width == 0) throw ConfigError("dense head sizes must be positive");
  HeadParams h;
  h.dense_weight = uniform_parameter({width, input}, std::sqrt(6.0 / static_cast<double>(input + width)), rng);
  h.dense_bias = zero_parameter({width});
  h.out_weight = uniform_parameter({1, width}, std::sqrt(6.0 / static_cast<double>(width + 1)), rng);
  h.out_bias = zero_parameter({1});
  return h;
}

Classification classify(const ContextualizedStates& states, std::span<const CnnBlockParams, 4> cnn,
                        const HeadParams& head, double slope) {
  const std::array<const Tensor*, 4> inputs{&states.comment_on_reply_fwd, &states.comment_on_reply_bwd,
                                            &states.reply_on_comment_fwd, &states.reply_on_comment_bwd};
  Classification out;
  for (std::size_t b = 0; b < 4; ++b) out.features.blocks[b] = cnn_block(*inputs[b], cnn[b], slope);
  out.features.p = ops::concat(out.features.blocks);
  if (head.dense_weight.dim(1) != out.features.p.size()) {
    throw DimensionError("classify: dense layer expects " + std::to_string(head.dense_weight.dim(1)) +
                         " features, blocks produced " + std::to_string(out.features.p.size()));
  }
  const Tensor hidden =
      ops::leaky_relu(ops::add(ops::matvec(head.dense_weight, out.features.p), head.dense_bias), slope);
  const Tensor logit = ops::add(ops::matvec(head.out_weight, hidden), head.out_bias);
  out.prediction = ops::reshape(ops::sigmoid(logit), {});
  return out;
}

Tensor bce_loss(const Tensor& predictions, std::span<const double> labels) { return ops::bce(predictions, labels); }

}  // namespace quip
