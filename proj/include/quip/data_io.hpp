#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quip/textprep.hpp"

namespace quip {

enum class Source { reddit, twitter };
enum class BalanceMode { balanced, imbalanced };

std::string_view to_string(Source source);
std::string_view to_string(BalanceMode mode);
// Throw ConfigError on unknown names.
Source parse_source(std::string_view name);
BalanceMode parse_balance_mode(std::string_view name);

struct RawPair {
  std::string comment;
  std::string reply;
  int label = 0;
  Source source = Source::reddit;

  bool operator==(const RawPair&) const = default;
};

// Canonical format: one JSON object per line with string fields "comment"
// and "reply" and a label of 0 or 1 (an optional "source" field is honoured).
// Blank lines are skipped. A missing or mistyped field is a ParseError naming
// the field and line; a label outside {0,1} is a ValueError.
std::vector<RawPair> read_jsonl(std::istream& in, Source default_source = Source::reddit);
std::vector<RawPair> load_jsonl(const std::filesystem::path& path, Source default_source = Source::reddit);
void write_jsonl(std::ostream& out, const std::vector<RawPair>& pairs);

// A Twitter thread: the target response plus every tweet that preceded it.
struct ContextRecord {
  std::vector<std::string> contexts;
  std::string response;
  int label = 0;
};

// One pair per context tweet, all sharing the response and label.
// Throws ValueError when there is no context.
std::vector<RawPair> explode_multi_context(const ContextRecord& record);

// Shared-task layouts. JSONL records carry "context" (list of strings),
// "response" and "label"; CSV files have a header naming the same three
// columns, with the context cell holding a JSON list or a single string.
// Labels may be SARCASM / NOT_SARCASM or 1 / 0. Records are exploded.
std::vector<RawPair> read_context_jsonl(std::istream& in);
std::vector<RawPair> read_context_csv(std::istream& in);

// Tab-separated comment, reply, label. A first line reading
// "comment<TAB>reply<TAB>label" is treated as a header.
std::vector<RawPair> read_pairs_tsv(std::istream& in, Source source = Source::reddit);

enum class DatasetFormat { jsonl, context_jsonl, context_csv, tsv };
std::string_view to_string(DatasetFormat format);
DatasetFormat parse_dataset_format(std::string_view name);
// .csv and .tsv go by extension; a JSONL file whose first record has a
// "response" field is read as the shared-task layout.
DatasetFormat detect_format(const std::filesystem::path& path);
std::vector<RawPair> load_dataset(const std::filesystem::path& path, std::optional<DatasetFormat> format = std::nullopt,
                                  Source default_source = Source::reddit);

// Number of whitespace-separated words, before any punctuation splitting.
std::size_t whitespace_word_count(std::string_view text);

// Keeps pairs whose comment and reply both have fewer than max_words words.
std::vector<RawPair> filter_by_length(const std::vector<RawPair>& pairs, std::size_t max_words);

struct RawSplit {
  std::vector<RawPair> train;
  std::vector<RawPair> validation;
  std::vector<RawPair> test;
  BalanceMode mode = BalanceMode::balanced;
};

inline constexpr double kTestFraction = 0.1;
inline constexpr double kValidationFraction = 0.1;
// Positive share targeted by imbalanced mode.
inline constexpr double kImbalancedPositiveShare = 0.2;

// Removes duplicate (comment, reply) pairs keeping the first occurrence, then
// shuffles each class with the seed and subsamples it (balanced: majority
// down to the minority count; imbalanced: toward 20:80 positive:negative).
// Each class then gives round(10%) to test and round(10%) of what remains to
// validation; the rest is train. Throws ContractError when a class is empty.
RawSplit make_split(const std::vector<RawPair>& pairs, BalanceMode mode, std::uint64_t seed);

struct DatasetSplit {
  std::vector<TokenizedPair> train;
  std::vector<TokenizedPair> validation;
  std::vector<TokenizedPair> test;
  BalanceMode mode = BalanceMode::balanced;
  std::size_t n = 0;
};

DatasetSplit tokenize_split(const RawSplit& split, const Preprocessor& prep);

struct ClassCounts {
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t total() const noexcept { return positive + negative; }
};
ClassCounts count_classes(const std::vector<RawPair>& pairs);

}  // namespace quip
