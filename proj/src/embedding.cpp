#include "quip/embedding.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <unicode/utf8.h>

#include "quip/errors.hpp"
#include "quip/ops.hpp"

namespace quip {

namespace {

// Splits UTF-8 into code-point-sized byte runs. Malformed bytes become
// single-byte pieces so no input is lost.
std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const int32_t length = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t start = i;
    UChar32 c = 0;
    U8_NEXT(bytes, i, length, c);
    (void)c;
    out.push_back(s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
  }
  return out;
}

bool parse_double(std::string_view token, double& out) {
  auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && end == token.data() + token.size();
}

bool parse_size(std::string_view token, std::size_t& out) {
  auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc() && end == token.data() + token.size();
}

}  // namespace

std::vector<std::string> char_ngrams(std::string_view word, std::size_t n_min, std::size_t n_max) {
  if (word.empty()) throw ContractError("char_ngrams: empty word");
  if (word == kPad) throw ContractError("char_ngrams: PAD has no n-grams");
  if (n_min == 0 || n_min > n_max) throw ContractError("char_ngrams: need 1 <= n_min <= n_max");

  std::vector<std::string_view> units{"<"};
  for (auto cp : code_points(word)) units.push_back(cp);
  units.emplace_back(">");
  const std::size_t total = units.size();

  std::string whole;
  for (auto u : units) whole += u;

  std::vector<std::string> grams;
  for (std::size_t len = n_min; len <= n_max && len < total; ++len) {
    for (std::size_t start = 0; start + len <= total; ++start) {
      std::string gram;
      for (std::size_t k = start; k < start + len; ++k) gram += units[k];
      grams.push_back(std::move(gram));
    }
  }
  grams.push_back(std::move(whole));
  return grams;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

EmbeddingTable::EmbeddingTable(EmbeddingConfig config, Rng& rng) : config_(config) {
  if (config_.dim == 0) throw ConfigError("embedding dim must be positive");
  if (config_.bucket_count == 0) throw ConfigError("bucket_count must be positive");
  if (config_.ngram_min == 0 || config_.ngram_min > config_.ngram_max) {
    throw ConfigError("n-gram bounds must satisfy 1 <= ngram_min <= ngram_max");
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(config_.dim));
  std::vector<double> values(config_.bucket_count * config_.dim);
  for (double& v : values) v = rng.uniform(-bound, bound);
  const Shape shape{config_.bucket_count, config_.dim};
  buckets_ = config_.trainable ? Tensor::parameter(shape, std::move(values)) : Tensor::constant(shape, std::move(values));
}

void EmbeddingTable::set_trainable(bool trainable) {
  if (trainable == config_.trainable) return;
  config_.trainable = trainable;
  std::vector<double> values(buckets_.values().begin(), buckets_.values().end());
  buckets_ = trainable ? Tensor::parameter(buckets_.shape(), std::move(values))
                       : Tensor::constant(buckets_.shape(), std::move(values));
}

std::vector<std::size_t> EmbeddingTable::bucket_rows(std::string_view word) const {
  std::vector<std::size_t> rows;
  for (const auto& gram : char_ngrams(word, config_.ngram_min, config_.ngram_max)) {
    rows.push_back(static_cast<std::size_t>(fnv1a64(gram) % config_.bucket_count));
  }
  return rows;
}

Tensor EmbeddingTable::word_vector(std::string_view word) const {
  return ops::reshape(sentence_matrix(Tokens{std::string(word)}), {config_.dim});
}

EmbeddingTable::SentenceLookup EmbeddingTable::lookup(const Tokens& tokens) const {
  if (tokens.empty()) throw ContractError("sentence lookup: no tokens");
  SentenceLookup out;
  out.groups.resize(tokens.size());
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    const std::string& t = tokens[r];
    if (t == kPad || t.empty()) continue;
    if (auto it = pretrained_.find(t); it != pretrained_.end()) {
      if (out.fixed.empty()) out.fixed.assign(tokens.size() * config_.dim, 0.0);
      std::copy(it->second.begin(), it->second.end(),
                out.fixed.begin() + static_cast<std::ptrdiff_t>(r * config_.dim));
      continue;
    }
    out.groups[r] = bucket_rows(t);
  }
  return out;
}

Tensor EmbeddingTable::embed(const SentenceLookup& lookup) const {
  Tensor composed = ops::gather_mean_rows(buckets_, lookup.groups);
  if (lookup.fixed.empty()) return composed;
  return ops::add(composed, Tensor::constant(composed.shape(), lookup.fixed));
}

Tensor EmbeddingTable::sentence_matrix(const Tokens& tokens) const { return embed(lookup(tokens)); }

void EmbeddingTable::read_pretrained(std::istream& in) {
  std::unordered_map<std::string, std::vector<double>> loaded;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(std::move(f));
    if (fields.empty()) continue;

    std::size_t header_count = 0, header_dim = 0;
    if (line_no == 1 && fields.size() == 2 && parse_size(fields[0], header_count) && parse_size(fields[1], header_dim)) {
      if (header_dim != config_.dim) {
        throw ParseError("dimension mismatch: file declares " + std::to_string(header_dim) +
                             " dims, configured d=" + std::to_string(config_.dim),
                         line_no);
      }
      continue;
    }
    const std::size_t found = fields.size() - 1;
    if (found != config_.dim) {
      throw ParseError("dimension mismatch: vector for '" + fields[0] + "' has " + std::to_string(found) +
                           " values, configured d=" + std::to_string(config_.dim),
                       line_no);
    }
    std::vector<double> vec(config_.dim);
    for (std::size_t j = 0; j < config_.dim; ++j) {
      if (!parse_double(fields[j + 1], vec[j]) || !std::isfinite(vec[j])) {
        throw ParseError("malformed value '" + fields[j + 1] + "' for '" + fields[0] + "'", line_no);
      }
    }
    loaded[fields[0]] = std::move(vec);
  }
  for (auto& [word, vec] : loaded) pretrained_[word] = std::move(vec);
}

void EmbeddingTable::load_pretrained(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pretrained vectors '" + path.string() + "'");
  read_pretrained(in);
}

}  // namespace quip
