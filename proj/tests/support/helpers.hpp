#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "quip/encoder.hpp"
#include "quip/head.hpp"
#include "quip/random.hpp"
#include "quip/tensor.hpp"
#include "quip/textprep.hpp"
#include "oracles.hpp"

namespace testing_support {

inline std::vector<double> random_values(quip::Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

inline quip::Tensor random_param(quip::Rng& rng, quip::Shape shape, double scale = 1.0) {
  auto values = random_values(rng, quip::shape_size(shape), scale);
  return quip::Tensor::parameter(std::move(shape), std::move(values));
}

inline quip::Tensor random_const(quip::Rng& rng, quip::Shape shape, double scale = 1.0) {
  auto values = random_values(rng, quip::shape_size(shape), scale);
  return quip::Tensor::constant(std::move(shape), std::move(values));
}

inline std::vector<double> vec(const quip::Tensor& t) { return {t.values().begin(), t.values().end()}; }

inline oracle::Mat mat(const quip::Tensor& t) { return oracle::Mat(t.dim(0), t.dim(1), vec(t)); }

inline oracle::Lstm lstm(const quip::LstmParams& p) { return {mat(p.w_input), mat(p.w_hidden), vec(p.bias)}; }

inline std::vector<oracle::Conv> convs(const quip::CnnBlockParams& block) {
  std::vector<oracle::Conv> out;
  for (const auto& layer : block.layers) {
    out.push_back({layer.kernel.dim(0), layer.kernel.dim(1), layer.kernel.dim(2), vec(layer.kernel), vec(layer.bias)});
  }
  return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Random LSTM parameters at a scale that keeps gates away from saturation.
inline quip::LstmParams random_lstm(quip::Rng& rng, std::size_t in, std::size_t hidden, double scale = 0.5) {
  return {random_param(rng, {4 * hidden, in}, scale), random_param(rng, {4 * hidden, hidden}, scale),
          random_param(rng, {4 * hidden}, scale)};
}

// Sixty-four short pairs; the label is 1 exactly when the comment contains
// "great" and the reply contains "sure". Half the pairs are positive.
inline std::vector<quip::TokenizedPair> trigger_dataset(std::size_t n, std::uint64_t seed, std::size_t count = 64) {
  static const char* filler[] = {"the", "game", "movie", "phone", "weather", "team", "show", "day",
                                 "food", "city", "song", "book", "car", "price", "patch", "night"};
  quip::Rng rng(seed);
  auto sentence = [&](bool trigger, const char* word) {
    const std::size_t length = 3 + rng.below(n - 3);
    quip::Tokens t;
    for (std::size_t i = 0; i < length; ++i) t.emplace_back(filler[rng.below(std::size(filler))]);
    if (trigger) t[rng.below(length)] = word;
    return quip::pad_or_truncate(std::move(t), n);
  };
  std::vector<quip::TokenizedPair> out;
  for (std::size_t i = 0; i < count; ++i) {
    // Positions 0-3 of every eight are positive, 4 and 5 carry one trigger,
    // 6 and 7 carry none.
    const std::size_t kind = i % 8;
    const bool comment_trigger = kind <= 4;
    const bool reply_trigger = kind < 4 || kind == 5;
    quip::TokenizedPair p;
    p.comment_tokens = sentence(comment_trigger, "great");
    p.reply_tokens = sentence(reply_trigger, "sure");
    p.label = comment_trigger && reply_trigger ? 1 : 0;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace testing_support
