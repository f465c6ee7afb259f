#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace quip {

// Reserved filler token. The tokenizer never emits it for corpus text.
inline constexpr std::string_view kPad = "<pad>";

using Tokens = std::vector<std::string>;

// Lowercases (full Unicode case mapping), splits on whitespace, and emits
// every Unicode punctuation character (general category P*) as a token of
// its own. Stop-words are kept. Invalid UTF-8 becomes U+FFFD.
Tokens normalize_and_tokenize(std::string_view text);

// Exact-match map from a lowercase token to its expansion.
class SlangDictionary {
 public:
  SlangDictionary() = default;

  // One mapping per line: `token<TAB>expansion words`. Blank lines and lines
  // starting with '#' are skipped. Keys and expansions are normalized with
  // normalize_and_tokenize; a key that does not normalize to a single token
  // is a ParseError.
  static SlangDictionary read(std::istream& in);
  static SlangDictionary load(const std::filesystem::path& path);

  void add(const std::string& token, const std::string& expansion);
  const Tokens* lookup(const std::string& token) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::unordered_map<std::string, Tokens> entries_;
};

Tokens expand_slang(const Tokens& tokens, const SlangDictionary& dict);

// Appends kPad up to length n or keeps the first n tokens.
Tokens pad_or_truncate(Tokens tokens, std::size_t n);

struct TokenizedPair {
  Tokens comment_tokens;  // length n
  Tokens reply_tokens;    // length n
  int label = 0;
};

// Full text pipeline: normalize, expand slang, then pad or truncate to n.
class Preprocessor {
 public:
  Preprocessor(SlangDictionary slang, std::size_t n);

  // Normalized and slang-expanded, before padding.
  Tokens tokens(std::string_view text) const;
  Tokens padded(std::string_view text) const;
  TokenizedPair prepare(std::string_view comment, std::string_view reply, int label) const;

  std::size_t n() const noexcept { return n_; }
  const SlangDictionary& slang() const noexcept { return slang_; }

 private:
  SlangDictionary slang_;
  std::size_t n_;
};

}  // namespace quip
