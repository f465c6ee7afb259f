#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "quip/data_io.hpp"
#include "quip/errors.hpp"

using namespace quip;

namespace {

std::string words(std::size_t count) {
  std::string s;
  for (std::size_t i = 0; i < count; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

std::vector<RawPair> synthetic(std::size_t positives, std::size_t negatives) {
  std::vector<RawPair> out;
  for (std::size_t i = 0; i < positives; ++i) out.push_back({"pos c" + std::to_string(i), "r", 1, Source::reddit});
  for (std::size_t i = 0; i < negatives; ++i) out.push_back({"neg c" + std::to_string(i), "r", 0, Source::reddit});
  return out;
}

std::set<std::pair<std::string, std::string>> keys(const std::vector<RawPair>& pairs) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& p : pairs) out.emplace(p.comment, p.reply);
  return out;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("quip_data_io_" + name);
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST(Jsonl, ReadsOneRecordPerLine) {
  std::istringstream in("{\"comment\":\"a\",\"reply\":\"b\",\"label\":1}\n\n{\"comment\":\"c\",\"reply\":\"d\",\"label\":0,"
                        "\"source\":\"twitter\"}\n");
  const auto pairs = read_jsonl(in);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], (RawPair{"a", "b", 1, Source::reddit}));
  EXPECT_EQ(pairs[1].source, Source::twitter);
}

TEST(Jsonl, EmptyInputGivesNoPairs) {
  std::istringstream in("");
  EXPECT_TRUE(read_jsonl(in).empty());
}

TEST(Jsonl, MissingLabelCitesLine) {
  std::istringstream in("{\"comment\":\"a\",\"reply\":\"b\"}\n");
  try {
    read_jsonl(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
  }
}

TEST(Jsonl, LabelOutsideBinaryIsValueError) {
  std::istringstream in("{\"comment\":\"a\",\"reply\":\"b\",\"label\":1}\n{\"comment\":\"a\",\"reply\":\"b\",\"label\":2}\n");
  try {
    read_jsonl(in);
    FAIL() << "expected ValueError";
  } catch (const ValueError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Jsonl, MalformedJsonIsParseError) {
  std::istringstream in("{\"comment\":\"a\",\n");
  EXPECT_THROW(read_jsonl(in), ParseError);
}

TEST(Jsonl, WriteThenReadRoundTrips) {
  const std::vector<RawPair> pairs{{"Hé \"quoted\"", "tab\there", 1, Source::twitter}, {"x", "", 0, Source::reddit}};
  std::stringstream io;
  write_jsonl(io, pairs);
  EXPECT_EQ(read_jsonl(io), pairs);
}

TEST(LengthFilter, StrictlyBelowLimit) {
  const std::vector<RawPair> pairs{{words(19), words(19), 1, Source::reddit},
                                   {words(20), words(3), 1, Source::reddit},
                                   {words(3), words(20), 0, Source::reddit},
                                   {"", words(5), 0, Source::reddit}};
  const auto kept = filter_by_length(pairs, 20);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0], pairs[0]);
  EXPECT_EQ(kept[1], pairs[3]);
}

TEST(LengthFilter, FortyWordLimit) {
  const std::vector<RawPair> pairs{{words(39), "ok", 1, Source::twitter}, {words(40), "ok", 1, Source::twitter}};
  EXPECT_EQ(filter_by_length(pairs, 40).size(), 1u);
  EXPECT_THROW(filter_by_length(pairs, 0), ContractError);
}

TEST(LengthFilter, CountsWhitespaceSeparatedWords) {
  EXPECT_EQ(whitespace_word_count(""), 0u);
  EXPECT_EQ(whitespace_word_count("  oh,   great!\t\nsure "), 3u);
  EXPECT_EQ(whitespace_word_count("a b"), 2u);
}

TEST(Split, BalancedSubsamplesMajority) {
  const auto split = make_split(synthetic(100, 300), BalanceMode::balanced, 7);
  std::vector<RawPair> all = split.train;
  all.insert(all.end(), split.validation.begin(), split.validation.end());
  all.insert(all.end(), split.test.begin(), split.test.end());
  const auto counts = count_classes(all);
  EXPECT_EQ(counts.positive, 100u);
  EXPECT_EQ(counts.negative, 100u);
  EXPECT_EQ(count_classes(split.train).positive, count_classes(split.train).negative);
  EXPECT_EQ(split.test.size(), 20u);
  EXPECT_EQ(split.validation.size(), 18u);
  EXPECT_EQ(split.train.size(), 162u);
}

TEST(Split, ImbalancedTargetsTwentyEighty) {
  const auto split = make_split(synthetic(100, 300), BalanceMode::imbalanced, 7);
  std::vector<RawPair> all = split.train;
  all.insert(all.end(), split.validation.begin(), split.validation.end());
  all.insert(all.end(), split.test.begin(), split.test.end());
  const auto counts = count_classes(all);
  EXPECT_EQ(counts.positive, 75u);
  EXPECT_EQ(counts.negative, 300u);
}

TEST(Split, ImbalancedKeepsNegativesWhenPositivesAreScarce) {
  const auto split = make_split(synthetic(10, 100), BalanceMode::imbalanced, 3);
  const auto train = count_classes(split.train), test = count_classes(split.test), val = count_classes(split.validation);
  EXPECT_EQ(train.positive + test.positive + val.positive, 10u);
  EXPECT_EQ(train.negative + test.negative + val.negative, 40u);
}

TEST(Split, DisjointAndReproducible) {
  const auto data = synthetic(60, 90);
  const auto a = make_split(data, BalanceMode::balanced, 11);
  const auto b = make_split(data, BalanceMode::balanced, 11);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  const auto tr = keys(a.train), va = keys(a.validation), te = keys(a.test);
  for (const auto& k : va) EXPECT_FALSE(tr.count(k));
  for (const auto& k : te) EXPECT_FALSE(tr.count(k) || va.count(k));
  const auto c = make_split(data, BalanceMode::balanced, 12);
  EXPECT_NE(keys(a.test), keys(c.test));
}

TEST(Split, DuplicatesCollapseToFirstOccurrence) {
  auto data = synthetic(20, 20);
  data.push_back({"pos c0", "r", 0, Source::reddit});
  const auto split = make_split(data, BalanceMode::balanced, 1);
  EXPECT_EQ(split.train.size() + split.validation.size() + split.test.size(), 40u);
}

TEST(Split, MissingClassIsContractError) {
  EXPECT_THROW(make_split(synthetic(0, 10), BalanceMode::balanced, 1), ContractError);
  EXPECT_THROW(make_split(synthetic(10, 0), BalanceMode::imbalanced, 1), ContractError);
}

TEST(Explode, OnePairPerContext) {
  const ContextRecord three{{"c1", "c2", "c3"}, "resp", 1};
  const auto pairs = explode_multi_context(three);
  ASSERT_EQ(pairs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(pairs[i].comment, three.contexts[i]);
    EXPECT_EQ(pairs[i].reply, "resp");
    EXPECT_EQ(pairs[i].label, 1);
    EXPECT_EQ(pairs[i].source, Source::twitter);
  }
  EXPECT_EQ(explode_multi_context({{"only"}, "r", 0}).size(), 1u);
  EXPECT_THROW(explode_multi_context({{}, "r", 0}), ValueError);
}

TEST(Adapters, ContextJsonl) {
  std::istringstream in(
      "{\"label\":\"SARCASM\",\"response\":\"sure\",\"context\":[\"a\",\"b\"]}\n"
      "{\"label\":\"NOT_SARCASM\",\"response\":\"no\",\"context\":[\"c\"]}\n");
  const auto pairs = read_context_jsonl(in);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[1], (RawPair{"b", "sure", 1, Source::twitter}));
  EXPECT_EQ(pairs[2].label, 0);
}

TEST(Adapters, ContextCsvWithQuotedFields) {
  std::istringstream in(
      "label,context,response\n"
      "SARCASM,\"[\"\"first, one\"\", \"\"second\"\"]\",\"well, sure\"\n"
      "0,plain context,\"multi\nline\"\n");
  const auto pairs = read_context_csv(in);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0], (RawPair{"first, one", "well, sure", 1, Source::twitter}));
  EXPECT_EQ(pairs[1].comment, "second");
  EXPECT_EQ(pairs[2], (RawPair{"plain context", "multi\nline", 0, Source::twitter}));
}

TEST(Adapters, CsvMissingColumnIsParseError) {
  std::istringstream in("label,response\n1,x\n");
  EXPECT_THROW(read_context_csv(in), ParseError);
}

TEST(Adapters, PairsTsv) {
  std::istringstream in("comment\treply\tlabel\nyeah right\tsure\t1\nnice\tthanks\t0\n");
  const auto pairs = read_pairs_tsv(in);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], (RawPair{"yeah right", "sure", 1, Source::reddit}));
  std::istringstream bad("a\tb\n");
  EXPECT_THROW(read_pairs_tsv(bad), ParseError);
}

TEST(Adapters, FormatDetection) {
  const auto canonical = temp_file("canonical.jsonl", "{\"comment\":\"a\",\"reply\":\"b\",\"label\":1}\n");
  const auto shared = temp_file("shared.jsonl", "{\"label\":\"SARCASM\",\"response\":\"r\",\"context\":[\"x\",\"y\"]}\n");
  const auto tsv = temp_file("pairs.tsv", "a\tb\t0\n");
  EXPECT_EQ(detect_format(canonical), DatasetFormat::jsonl);
  EXPECT_EQ(detect_format(shared), DatasetFormat::context_jsonl);
  EXPECT_EQ(detect_format(tsv), DatasetFormat::tsv);
  EXPECT_EQ(load_dataset(shared).size(), 2u);
  EXPECT_EQ(load_dataset(tsv).size(), 1u);
  EXPECT_THROW(parse_dataset_format("xml"), ConfigError);
  for (const auto& p : {canonical, shared, tsv}) std::filesystem::remove(p);
}

TEST(Adapters, BundledToyDataIsBalanced) {
  const auto pairs = load_jsonl(QUIP_TEST_DATA_DIR "/toy_pairs.jsonl");
  EXPECT_EQ(pairs.size(), 64u);
  EXPECT_EQ(count_classes(pairs).positive, 32u);
}
