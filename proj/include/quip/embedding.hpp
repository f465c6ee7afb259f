#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "quip/random.hpp"
#include "quip/tensor.hpp"
#include "quip/textprep.hpp"

namespace quip {

struct EmbeddingConfig {
  std::size_t dim = 30;
  std::size_t ngram_min = 3;
  std::size_t ngram_max = 5;
  std::size_t bucket_count = 1u << 16;
  bool trainable = true;
};

// Character n-grams of `word` wrapped in '<' and '>': every contiguous run of
// ngram_min..ngram_max code points (shorter lengths first, then by position),
// followed by the whole wrapped word. A run equal to the whole wrapped word
// is only listed once, at the end.
std::vector<std::string> char_ngrams(std::string_view word, std::size_t n_min, std::size_t n_max);

// 64-bit FNV-1a over the UTF-8 bytes.
std::uint64_t fnv1a64(std::string_view bytes);

// Hashed subword table. A word's vector is the mean of the bucket rows its
// n-grams hash to (fnv1a64(gram) mod bucket_count); PAD is the zero vector.
// Words found in a loaded pretrained file use the file vector instead.
class EmbeddingTable {
 public:
  // Buckets start uniform in (-1/sqrt(dim), 1/sqrt(dim)).
  EmbeddingTable(EmbeddingConfig config, Rng& rng);

  const EmbeddingConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return config_.dim; }
  const Tensor& buckets() const noexcept { return buckets_; }
  bool trainable() const noexcept { return config_.trainable; }
  // Switches the bucket tensor between parameter and constant, keeping values.
  void set_trainable(bool trainable);

  // Precomputed per-token table rows, so a sentence can be embedded
  // repeatedly without rehashing its n-grams.
  struct SentenceLookup {
    std::vector<std::vector<std::size_t>> groups;
    std::vector<double> fixed;  // pretrained rows, empty if none
  };

  std::vector<std::size_t> bucket_rows(std::string_view word) const;
  SentenceLookup lookup(const Tokens& tokens) const;
  Tensor embed(const SentenceLookup& lookup) const;
  Tensor word_vector(std::string_view word) const;
  // [tokens.size() x dim], one row per token.
  Tensor sentence_matrix(const Tokens& tokens) const;

  // Standard word-vector text format: `word v_1 ... v_dim` per line, with an
  // optional leading `count dim` header. Errors carry the line number.
  void read_pretrained(std::istream& in);
  void load_pretrained(const std::filesystem::path& path);
  bool has_pretrained(const std::string& word) const { return pretrained_.count(word) != 0; }
  std::size_t pretrained_count() const noexcept { return pretrained_.size(); }

 private:
  EmbeddingConfig config_;
  Tensor buckets_;
  std::unordered_map<std::string, std::vector<double>> pretrained_;
};

}  // namespace quip
