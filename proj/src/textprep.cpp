#include "quip/textprep.hpp"

#include <fstream>
#include <istream>

#include <unicode/locid.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "quip/errors.hpp"

namespace quip {

namespace {

void flush(icu::UnicodeString& current, Tokens& out) {
  if (current.isEmpty()) return;
  std::string token;
  current.toUTF8String(token);
  current.remove();
  if (token == kPad) {
    // Literal "<pad>" in corpus text must not alias the sentinel.
    out.emplace_back("<");
    out.emplace_back("pad");
    out.emplace_back(">");
    return;
  }
  out.push_back(std::move(token));
}

}  // namespace

Tokens normalize_and_tokenize(std::string_view text) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  s.toLower(icu::Locale::getRoot());

  Tokens out;
  icu::UnicodeString current;
  for (int32_t i = 0; i < s.length(); i = s.moveIndex32(i, 1)) {
    const UChar32 c = s.char32At(i);
    if (u_isUWhiteSpace(c)) {
      flush(current, out);
    } else if (u_ispunct(c)) {
      flush(current, out);
      current.append(c);
      flush(current, out);
    } else {
      current.append(c);
    }
  }
  flush(current, out);
  return out;
}

SlangDictionary SlangDictionary::read(std::istream& in) {
  SlangDictionary dict;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("slang entry needs 'token<TAB>expansion'", line_no);
    try {
      dict.add(line.substr(0, tab), line.substr(tab + 1));
    } catch (const ContractError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return dict;
}

SlangDictionary SlangDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open slang dictionary '" + path.string() + "'");
  return read(in);
}

void SlangDictionary::add(const std::string& token, const std::string& expansion) {
  Tokens key = normalize_and_tokenize(token);
  if (key.size() != 1) throw ContractError("slang key '" + token + "' is not a single token");
  Tokens words = normalize_and_tokenize(expansion);
  if (words.empty()) throw ContractError("slang key '" + token + "' has an empty expansion");
  entries_[key.front()] = std::move(words);
}

const Tokens* SlangDictionary::lookup(const std::string& token) const {
  const auto it = entries_.find(token);
  return it == entries_.end() ? nullptr : &it->second;
}

Tokens expand_slang(const Tokens& tokens, const SlangDictionary& dict) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (const Tokens* expansion = dict.lookup(t)) {
      out.insert(out.end(), expansion->begin(), expansion->end());
    } else {
      out.push_back(t);
    }
  }
  return out;
}

Tokens pad_or_truncate(Tokens tokens, std::size_t n) {
  if (n == 0) throw ContractError("pad_or_truncate: n must be at least 1");
  tokens.resize(n, std::string(kPad));
  return tokens;
}

Preprocessor::Preprocessor(SlangDictionary slang, std::size_t n) : slang_(std::move(slang)), n_(n) {
  if (n_ == 0) throw ContractError("sequence length n must be at least 1");
}

Tokens Preprocessor::tokens(std::string_view text) const {
  return expand_slang(normalize_and_tokenize(text), slang_);
}

Tokens Preprocessor::padded(std::string_view text) const { return pad_or_truncate(tokens(text), n_); }

TokenizedPair Preprocessor::prepare(std::string_view comment, std::string_view reply, int label) const {
  if (label != 0 && label != 1) throw ContractError("label must be 0 or 1");
  return {padded(comment), padded(reply), label};
}

}  // namespace quip
