#include "quip/model.hpp"

#include "quip/errors.hpp"
#include "quip/ops.hpp"

namespace quip {

std::size_t ModelConfig::resolved_dense_width() const {
  if (dense_width != 0) return dense_width;
  return 4 * d() * (filters.empty() ? 0 : filters.back());
}

std::size_t ModelConfig::feature_length() const {
  std::size_t shrink = 0;
  for (std::size_t h : kernel_heights) shrink += h - 1;
  return 4 * (n - shrink) * filters.back();
}

void ModelConfig::validate() const {
  if (n == 0) throw ConfigError("n must be positive");
  if (embedding.dim == 0) throw ConfigError("d must be positive");
  if (embedding.bucket_count == 0) throw ConfigError("bucket_count must be positive");
  if (embedding.ngram_min == 0 || embedding.ngram_min > embedding.ngram_max) {
    throw ConfigError("n-gram bounds must satisfy 1 <= ngram_min <= ngram_max");
  }
  if (filters.empty() || filters.size() != kernel_heights.size()) {
    throw ConfigError("filters and kernel_heights must be non-empty lists of equal length");
  }
  std::size_t shrink = 0;
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (filters[i] == 0 || kernel_heights[i] == 0) throw ConfigError("filters and kernel_heights must be positive");
    shrink += kernel_heights[i] - 1;
  }
  if (n < shrink + 1) {
    throw ConfigError("n=" + std::to_string(n) + " is too short for the convolution stack (minimum " +
                      std::to_string(shrink + 1) + ")");
  }
  if (!(slope > 0.0 && slope < 1.0)) throw ConfigError("slope must lie in (0, 1)");
}

QuipModel::QuipModel(ModelConfig config, std::uint64_t seed)
    : config_((config.validate(), std::move(config))), rng_(seed), embedding_(config_.embedding, rng_) {
  const std::size_t d = config_.d();
  comment_encoder_ = {LstmParams::init(d, d, rng_), LstmParams::init(d, d, rng_)};
  reply_encoder_ = {LstmParams::init(d, d, rng_), LstmParams::init(d, d, rng_)};
  for (auto& block : cnn_) block = CnnBlockParams::init(d, config_.filters, config_.kernel_heights, rng_);
  head_ = HeadParams::init(config_.feature_length(), config_.resolved_dense_width(), rng_);
  register_parameters();
}

void QuipModel::register_parameters() {
  params_ = ParameterSet{};
  params_.add("embedding.buckets", embedding_.buckets());
  auto add_lstm = [this](const std::string& prefix, const LstmParams& p) {
    params_.add(prefix + ".w_input", p.w_input);
    params_.add(prefix + ".w_hidden", p.w_hidden);
    params_.add(prefix + ".bias", p.bias);
  };
  add_lstm("encoder.comment.fwd", comment_encoder_.forward);
  add_lstm("encoder.comment.bwd", comment_encoder_.backward);
  add_lstm("encoder.reply.fwd", reply_encoder_.forward);
  add_lstm("encoder.reply.bwd", reply_encoder_.backward);
  for (std::size_t b = 0; b < cnn_.size(); ++b) {
    for (std::size_t l = 0; l < cnn_[b].layers.size(); ++l) {
      const std::string prefix = "cnn" + std::to_string(b + 1) + ".conv" + std::to_string(l + 1);
      params_.add(prefix + ".kernel", cnn_[b].layers[l].kernel);
      params_.add(prefix + ".bias", cnn_[b].layers[l].bias);
    }
  }
  params_.add("head.dense.weight", head_.dense_weight, true);
  params_.add("head.dense.bias", head_.dense_bias);
  params_.add("head.out.weight", head_.out_weight, true);
  params_.add("head.out.bias", head_.out_bias);
}

void QuipModel::load_pretrained(const std::filesystem::path& path) {
  embedding_.load_pretrained(path);
  set_embedding_trainable(false);
}

void QuipModel::set_embedding_trainable(bool trainable) {
  embedding_.set_trainable(trainable);
  register_parameters();
}

EncodedPair QuipModel::encode(const TokenizedPair& pair) const {
  if (pair.comment_tokens.size() != config_.n || pair.reply_tokens.size() != config_.n) {
    throw DimensionError("pair has " + std::to_string(pair.comment_tokens.size()) + "/" +
                         std::to_string(pair.reply_tokens.size()) + " tokens, model expects n=" +
                         std::to_string(config_.n));
  }
  EncodedPair out;
  out.comment = embedding_.lookup(pair.comment_tokens);
  out.reply = embedding_.lookup(pair.reply_tokens);
  auto mask = [](const Tokens& tokens) {
    std::vector<double> m(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) m[i] = tokens[i] == kPad ? 0.0 : 1.0;
    return m;
  };
  out.comment_mask = mask(pair.comment_tokens);
  out.reply_mask = mask(pair.reply_tokens);
  out.label = static_cast<double>(pair.label);
  return out;
}

ForwardResult QuipModel::forward(const EncodedPair& pair) const {
  ForwardResult r;
  r.comment = bilstm_encode(embedding_.embed(pair.comment), comment_encoder_);
  r.reply = bilstm_encode(embedding_.embed(pair.reply), reply_encoder_);
  AttentionOptions options;
  options.softmax = config_.attention_softmax;
  if (config_.mask_pad) {
    options.comment_mask = pair.comment_mask;
    options.reply_mask = pair.reply_mask;
  }
  auto attended = bi_isca(r.comment, r.reply, options);
  r.maps = std::move(attended.maps);
  r.states = std::move(attended.states);
  auto classified = classify(r.states, cnn_, head_, config_.slope);
  r.features = std::move(classified.features);
  r.prediction = std::move(classified.prediction);
  return r;
}

Tensor QuipModel::batch_loss(std::span<const EncodedPair> batch) const {
  if (batch.empty()) throw ContractError("batch_loss: empty batch");
  std::vector<Tensor> predictions;
  std::vector<double> labels;
  predictions.reserve(batch.size());
  labels.reserve(batch.size());
  for (const auto& pair : batch) {
    predictions.push_back(forward(pair).prediction);
    labels.push_back(pair.label);
  }
  return bce_loss(ops::concat(predictions), labels);
}

double QuipModel::predict(const EncodedPair& pair) const {
  NoGradGuard no_grad;
  return forward(pair).prediction.item();
}

}  // namespace quip
