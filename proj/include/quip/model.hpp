#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "quip/attention.hpp"
#include "quip/embedding.hpp"
#include "quip/encoder.hpp"
#include "quip/head.hpp"
#include "quip/parameters.hpp"
#include "quip/textprep.hpp"

namespace quip {

struct ModelConfig {
  std::size_t n = 20;  // padded sentence length
  EmbeddingConfig embedding;
  std::vector<std::size_t> filters{64, 64};
  std::vector<std::size_t> kernel_heights{2, 2};
  // 0 selects 4 * d * k, with k the filter count of the last conv layer.
  std::size_t dense_width = 0;
  double slope = kDefaultLeakySlope;
  bool attention_softmax = false;
  bool mask_pad = false;

  std::size_t d() const noexcept { return embedding.dim; }
  std::size_t resolved_dense_width() const;
  // Length of the concatenated feature vector p.
  std::size_t feature_length() const;
  // Throws ConfigError describing the first problem found.
  void validate() const;
};

// A tokenized pair with its embedding lookups precomputed.
struct EncodedPair {
  EmbeddingTable::SentenceLookup comment;
  EmbeddingTable::SentenceLookup reply;
  std::vector<double> comment_mask;  // 1 for tokens, 0 for PAD
  std::vector<double> reply_mask;
  double label = 0.0;
};

struct ForwardResult {
  EncoderState comment;
  EncoderState reply;
  AttentionMaps maps;
  ContextualizedStates states;
  FeatureBundle features;
  Tensor prediction;  // scalar
};

// Embedding table, comment and reply BiLSTMs, cross attention, four CNN blocks and
// the dense head. Parameters are created from one seeded generator in a
// fixed order, so a seed fully determines the initial weights.
class QuipModel {
 public:
  QuipModel(ModelConfig config, std::uint64_t seed);
  // Copies would alias the same parameter storage.
  QuipModel(const QuipModel&) = delete;
  QuipModel& operator=(const QuipModel&) = delete;
  QuipModel(QuipModel&&) = default;
  QuipModel& operator=(QuipModel&&) = default;

  const ModelConfig& config() const noexcept { return config_; }
  const EmbeddingTable& embedding() const noexcept { return embedding_; }
  ParameterSet& parameters() noexcept { return params_; }
  const ParameterSet& parameters() const noexcept { return params_; }

  // Loads pretrained word vectors and freezes the embedding table.
  void load_pretrained(const std::filesystem::path& path);
  void set_embedding_trainable(bool trainable);

  EncodedPair encode(const TokenizedPair& pair) const;
  ForwardResult forward(const EncodedPair& pair) const;
  // Mean BCE over the batch, recorded for backward().
  Tensor batch_loss(std::span<const EncodedPair> batch) const;
  // Forward pass without recording a graph.
  double predict(const EncodedPair& pair) const;

  const BiLstmParams& comment_encoder() const noexcept { return comment_encoder_; }
  const BiLstmParams& reply_encoder() const noexcept { return reply_encoder_; }
  const std::array<CnnBlockParams, 4>& cnn_blocks() const noexcept { return cnn_; }
  const HeadParams& head() const noexcept { return head_; }

 private:
  void register_parameters();

  ModelConfig config_;
  Rng rng_;
  EmbeddingTable embedding_;
  BiLstmParams comment_encoder_;
  BiLstmParams reply_encoder_;
  std::array<CnnBlockParams, 4> cnn_;
  HeadParams head_;
  ParameterSet params_;
};

}  // namespace quip
