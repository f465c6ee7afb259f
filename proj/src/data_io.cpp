#include "quip/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <utility>

#include <nlohmann/json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "quip/errors.hpp"
#include "quip/random.hpp"

namespace quip {

using nlohmann::json;

std::string_view to_string(Source source) { return source == Source::reddit ? "reddit" : "twitter"; }

std::string_view to_string(BalanceMode mode) { return mode == BalanceMode::balanced ? "balanced" : "imbalanced"; }

Source parse_source(std::string_view name) {
  if (name == "reddit") return Source::reddit;
  if (name == "twitter") return Source::twitter;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected reddit or twitter)");
}

BalanceMode parse_balance_mode(std::string_view name) {
  if (name == "balanced") return BalanceMode::balanced;
  if (name == "imbalanced") return BalanceMode::imbalanced;
  throw ConfigError("unknown balance mode '" + std::string(name) + "' (expected balanced or imbalanced)");
}

std::string_view to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::jsonl: return "jsonl";
    case DatasetFormat::context_jsonl: return "context-jsonl";
    case DatasetFormat::context_csv: return "context-csv";
    case DatasetFormat::tsv: return "tsv";
  }
  return "jsonl";
}

DatasetFormat parse_dataset_format(std::string_view name) {
  for (auto f : {DatasetFormat::jsonl, DatasetFormat::context_jsonl, DatasetFormat::context_csv, DatasetFormat::tsv}) {
    if (name == to_string(f)) return f;
  }
  throw ConfigError("unknown dataset format '" + std::string(name) +
                    "' (expected jsonl, context-jsonl, context-csv or tsv)");
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

json parse_line(const std::string& line, std::size_t line_no) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
  }
  if (!record.is_object()) throw ParseError("record is not a JSON object", line_no);
  return record;
}

std::string string_field(const json& record, const char* field, std::size_t line_no) {
  const auto it = record.find(field);
  if (it == record.end()) throw ParseError(std::string("missing field '") + field + "'", line_no);
  if (!it->is_string()) throw ParseError(std::string("field '") + field + "' must be a string", line_no);
  return it->get<std::string>();
}

int label_value(const json& value, std::size_t line_no) {
  if (value.is_number_integer()) {
    const auto v = value.get<std::int64_t>();
    if (v == 0 || v == 1) return static_cast<int>(v);
    throw ValueError("label must be 0 or 1, got " + std::to_string(v), line_no);
  }
  if (value.is_number_float()) {
    const double v = value.get<double>();
    if (v == 0.0 || v == 1.0) return static_cast<int>(v);
    throw ValueError("label must be 0 or 1, got " + value.dump(), line_no);
  }
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (s == "1" || s == "SARCASM") return 1;
    if (s == "0" || s == "NOT_SARCASM") return 0;
    throw ValueError("label must be 0 or 1, got \"" + s + "\"", line_no);
  }
  throw ParseError("field 'label' must be a number or string", line_no);
}

int label_field(const json& record, std::size_t line_no) {
  const auto it = record.find("label");
  if (it == record.end()) throw ParseError("missing field 'label'", line_no);
  return label_value(*it, line_no);
}

std::vector<RawPair> explode_at(const ContextRecord& record, std::size_t line_no) {
  if (record.contexts.empty()) throw ValueError("record has no context", line_no);
  return explode_multi_context(record);
}

// RFC 4180: comma separated, double quotes around fields that need them,
// "" for a literal quote, line breaks allowed inside quoted fields.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // Reads the next record; false at end of input. `record_line` is the line
  // the record starts on.
  bool next(std::vector<std::string>& fields, std::size_t& record_line) {
    fields.clear();
    int c = in_.get();
    if (c == EOF) return false;
    ++line_;
    record_line = line_;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (;; c = in_.get()) {
      if (c == EOF) {
        if (quoted) throw ParseError("unterminated quoted field", record_line);
        break;
      }
      const char ch = static_cast<char>(c);
      if (quoted) {
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (ch == '\n') ++line_;
          field.push_back(ch);
        }
        continue;
      }
      if (ch == '"') {
        if (!field.empty() || was_quoted) throw ParseError("stray quote inside unquoted field", line_);
        quoted = was_quoted = true;
      } else if (ch == ',') {
        fields.push_back(std::move(field));
        field.clear();
        was_quoted = false;
      } else if (ch == '\n') {
        break;
      } else if (ch == '\r') {
        if (in_.peek() == '\n') continue;
        field.push_back(ch);
      } else {
        field.push_back(ch);
      }
    }
    fields.push_back(std::move(field));
    return true;
  }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::vector<std::string> context_cell(const std::string& cell, std::size_t line_no) {
  const auto first = cell.find_first_not_of(" \t");
  if (first != std::string::npos && cell[first] == '[') {
    json parsed;
    try {
      parsed = json::parse(cell);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("context cell is not a valid JSON list: ") + e.what(), line_no);
    }
    std::vector<std::string> out;
    for (const auto& item : parsed) {
      if (!item.is_string()) throw ParseError("context list entries must be strings", line_no);
      out.push_back(item.get<std::string>());
    }
    return out;
  }
  if (is_blank(cell)) return {};
  return {cell};
}

}  // namespace

std::vector<RawPair> read_jsonl(std::istream& in, Source default_source) {
  std::vector<RawPair> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (is_blank(line)) continue;
    const json record = parse_line(line, line_no);
    RawPair pair;
    pair.comment = string_field(record, "comment", line_no);
    pair.reply = string_field(record, "reply", line_no);
    pair.label = label_field(record, line_no);
    pair.source = default_source;
    if (const auto it = record.find("source"); it != record.end()) {
      if (!it->is_string()) throw ParseError("field 'source' must be a string", line_no);
      const auto s = it->get<std::string>();
      if (s == "reddit") pair.source = Source::reddit;
      else if (s == "twitter") pair.source = Source::twitter;
      else throw ValueError("source must be reddit or twitter, got \"" + s + "\"", line_no);
    }
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<RawPair> load_jsonl(const std::filesystem::path& path, Source default_source) {
  auto in = open_input(path);
  return read_jsonl(in, default_source);
}

void write_jsonl(std::ostream& out, const std::vector<RawPair>& pairs) {
  for (const auto& p : pairs) {
    out << json{{"comment", p.comment}, {"reply", p.reply}, {"label", p.label}, {"source", to_string(p.source)}}.dump()
        << '\n';
  }
}

std::vector<RawPair> explode_multi_context(const ContextRecord& record) {
  if (record.contexts.empty()) throw ValueError("record has no context", 0);
  std::vector<RawPair> out;
  out.reserve(record.contexts.size());
  for (const auto& context : record.contexts) {
    out.push_back({context, record.response, record.label, Source::twitter});
  }
  return out;
}

std::vector<RawPair> read_context_jsonl(std::istream& in) {
  std::vector<RawPair> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (is_blank(line)) continue;
    const json record = parse_line(line, line_no);
    ContextRecord rec;
    rec.response = string_field(record, "response", line_no);
    rec.label = label_field(record, line_no);
    const auto it = record.find("context");
    if (it == record.end()) throw ParseError("missing field 'context'", line_no);
    if (it->is_string()) {
      rec.contexts.push_back(it->get<std::string>());
    } else if (it->is_array()) {
      for (const auto& item : *it) {
        if (!item.is_string()) throw ParseError("context list entries must be strings", line_no);
        rec.contexts.push_back(item.get<std::string>());
      }
    } else {
      throw ParseError("field 'context' must be a list of strings", line_no);
    }
    auto pairs = explode_at(rec, line_no);
    out.insert(out.end(), std::make_move_iterator(pairs.begin()), std::make_move_iterator(pairs.end()));
  }
  return out;
}

std::vector<RawPair> read_context_csv(std::istream& in) {
  CsvReader reader(in);
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  if (!reader.next(fields, line_no)) return {};
  std::optional<std::size_t> context_col, response_col, label_col;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i] == "context") context_col = i;
    else if (fields[i] == "response") response_col = i;
    else if (fields[i] == "label") label_col = i;
  }
  if (!context_col) throw ParseError("missing column 'context'", line_no);
  if (!response_col) throw ParseError("missing column 'response'", line_no);
  if (!label_col) throw ParseError("missing column 'label'", line_no);
  const std::size_t width = fields.size();

  std::vector<RawPair> out;
  while (reader.next(fields, line_no)) {
    if (fields.size() == 1 && is_blank(fields[0])) continue;
    if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " columns, found " + std::to_string(fields.size()),
                       line_no);
    }
    ContextRecord rec;
    rec.contexts = context_cell(fields[*context_col], line_no);
    rec.response = fields[*response_col];
    rec.label = label_value(json(fields[*label_col]), line_no);
    auto pairs = explode_at(rec, line_no);
    out.insert(out.end(), std::make_move_iterator(pairs.begin()), std::make_move_iterator(pairs.end()));
  }
  return out;
}

std::vector<RawPair> read_pairs_tsv(std::istream& in, Source source) {
  std::vector<RawPair> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    if (line_no == 1 && line == "comment\treply\tlabel") continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1) {
      cols.push_back(line.substr(start, tab - start));
    }
    cols.push_back(line.substr(start));
    if (cols.size() != 3) {
      throw ParseError("expected 3 tab-separated columns, found " + std::to_string(cols.size()), line_no);
    }
    out.push_back({cols[0], cols[1], label_value(json(cols[2]), line_no), source});
  }
  return out;
}

DatasetFormat detect_format(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return DatasetFormat::context_csv;
  if (ext == ".tsv") return DatasetFormat::tsv;
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const json record = parse_line(line, line_no);
    return record.contains("response") ? DatasetFormat::context_jsonl : DatasetFormat::jsonl;
  }
  return DatasetFormat::jsonl;
}

std::vector<RawPair> load_dataset(const std::filesystem::path& path, std::optional<DatasetFormat> format,
                                  Source default_source) {
  const DatasetFormat f = format ? *format : detect_format(path);
  auto in = open_input(path);
  switch (f) {
    case DatasetFormat::jsonl: return read_jsonl(in, default_source);
    case DatasetFormat::context_jsonl: return read_context_jsonl(in);
    case DatasetFormat::context_csv: return read_context_csv(in);
    case DatasetFormat::tsv: return read_pairs_tsv(in, default_source);
  }
  return {};
}

std::size_t whitespace_word_count(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  for (int32_t i = 0; i < length;) {
    UChar32 c;
    U8_NEXT(s, i, length, c);
    const bool space = c >= 0 && u_isUWhiteSpace(c);
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

std::vector<RawPair> filter_by_length(const std::vector<RawPair>& pairs, std::size_t max_words) {
  if (max_words == 0) throw ContractError("filter_by_length: max_words must be at least 1");
  std::vector<RawPair> out;
  for (const auto& p : pairs) {
    if (whitespace_word_count(p.comment) < max_words && whitespace_word_count(p.reply) < max_words) out.push_back(p);
  }
  return out;
}

ClassCounts count_classes(const std::vector<RawPair>& pairs) {
  ClassCounts c;
  for (const auto& p : pairs) (p.label == 1 ? c.positive : c.negative) += 1;
  return c;
}

namespace {

std::size_t round_count(double x) { return static_cast<std::size_t>(std::llround(x)); }

}  // namespace

RawSplit make_split(const std::vector<RawPair>& pairs, BalanceMode mode, std::uint64_t seed) {
  std::vector<RawPair> positives, negatives;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    if (!seen.emplace(p.comment, p.reply).second) continue;
    (p.label == 1 ? positives : negatives).push_back(p);
  }
  if (positives.empty()) throw ContractError("make_split: no positive (label 1) pairs");
  if (negatives.empty()) throw ContractError("make_split: no negative (label 0) pairs");

  Rng rng(seed);
  rng.shuffle(positives);
  rng.shuffle(negatives);

  std::size_t keep_pos = positives.size();
  std::size_t keep_neg = negatives.size();
  if (mode == BalanceMode::balanced) {
    keep_pos = keep_neg = std::min(keep_pos, keep_neg);
  } else {
    const double ratio = (1.0 - kImbalancedPositiveShare) / kImbalancedPositiveShare;  // negatives per positive
    if (static_cast<double>(keep_pos) * ratio > static_cast<double>(keep_neg)) {
      keep_pos = std::max<std::size_t>(1, round_count(static_cast<double>(keep_neg) / ratio));
    } else {
      keep_neg = std::min(keep_neg, round_count(static_cast<double>(keep_pos) * ratio));
    }
  }
  positives.resize(keep_pos);
  negatives.resize(keep_neg);

  RawSplit split;
  split.mode = mode;
  for (auto* group : {&positives, &negatives}) {
    const std::size_t total = group->size();
    const std::size_t test = round_count(static_cast<double>(total) * kTestFraction);
    const std::size_t val = round_count(static_cast<double>(total - test) * kValidationFraction);
    auto it = group->begin();
    split.test.insert(split.test.end(), it, it + static_cast<std::ptrdiff_t>(test));
    it += static_cast<std::ptrdiff_t>(test);
    split.validation.insert(split.validation.end(), it, it + static_cast<std::ptrdiff_t>(val));
    it += static_cast<std::ptrdiff_t>(val);
    split.train.insert(split.train.end(), it, group->end());
  }
  rng.shuffle(split.train);
  rng.shuffle(split.validation);
  rng.shuffle(split.test);
  return split;
}

DatasetSplit tokenize_split(const RawSplit& split, const Preprocessor& prep) {
  DatasetSplit out;
  out.mode = split.mode;
  out.n = prep.n();
  auto convert = [&prep](const std::vector<RawPair>& in, std::vector<TokenizedPair>& dst) {
    dst.reserve(in.size());
    for (const auto& p : in) dst.push_back(prep.prepare(p.comment, p.reply, p.label));
  };
  convert(split.train, out.train);
  convert(split.validation, out.validation);
  convert(split.test, out.test);
  return out;
}

}  // namespace quip
