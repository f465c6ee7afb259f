#include "quip/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "quip/errors.hpp"
#include "quip/serialize.hpp"

#ifndef QUIP_DATA_DIR
#define QUIP_DATA_DIR "data"
#endif

namespace quip {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Raised for bad invocations that are not config problems (missing inputs,
// empty sentences). Maps to the usage exit code like ConfigError.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t as_count(const json& v, const std::string& key) {
  // Parsed text yields unsigned values; JSON built in code may hold signed ones.
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
  return v.get<bool>();
}

std::string as_text(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<std::size_t> as_counts(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be a list of non-negative integers");
  std::vector<std::size_t> out;
  for (const auto& item : v) out.push_back(as_count(item, key));
  return out;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (threads == 0) throw ConfigError("threads must be at least 1");
  if (!dataset_format.empty()) parse_dataset_format(dataset_format);
  if (train.seed != seed) throw ConfigError("internal: training seed out of sync with run seed");
}

json RunConfig::to_json() const {
  return json{
      {"mode", to_string(mode)},
      {"balance", to_string(balance)},
      {"seed", seed},
      {"dataset", dataset},
      {"dataset_format", dataset_format},
      {"slang", slang},
      {"pretrained", pretrained},
      {"max_words", max_words},
      {"threads", threads},
      {"n", model.n},
      {"d", model.embedding.dim},
      {"bucket_count", model.embedding.bucket_count},
      {"ngram_min", model.embedding.ngram_min},
      {"ngram_max", model.embedding.ngram_max},
      {"filters", model.filters},
      {"kernel_heights", model.kernel_heights},
      {"dense_width", model.dense_width},
      {"slope", model.slope},
      {"attention_softmax", model.attention_softmax},
      {"mask_pad", model.mask_pad},
      {"learning_rate", train.learning_rate},
      {"epochs", train.epochs},
      {"batch_size", train.batch_size},
      {"l2_lambda", train.l2_lambda},
      {"patience", train.patience},
      {"adam_beta1", train.adam_beta1},
      {"adam_beta2", train.adam_beta2},
      {"adam_eps", train.adam_eps},
  };
}

RunConfig mode_defaults(Source mode) {
  RunConfig c;
  c.mode = mode;
  c.slang = default_slang_path().string();
  if (mode == Source::reddit) {
    c.model.n = 20;
    c.train.batch_size = 2000;
  } else {
    c.model.n = 40;
    c.train.batch_size = 500;
  }
  return c;
}

void apply_config_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "mode") c.mode = parse_source(as_text(v, key));
    else if (key == "balance") c.balance = parse_balance_mode(as_text(v, key));
    else if (key == "seed") c.seed = c.train.seed = as_count(v, key);
    else if (key == "dataset") c.dataset = as_text(v, key);
    else if (key == "dataset_format") c.dataset_format = as_text(v, key);
    else if (key == "slang") c.slang = as_text(v, key);
    else if (key == "pretrained") c.pretrained = as_text(v, key);
    else if (key == "max_words") c.max_words = as_count(v, key);
    else if (key == "threads") c.threads = static_cast<unsigned>(as_count(v, key));
    else if (key == "n") c.model.n = as_count(v, key);
    else if (key == "d") c.model.embedding.dim = as_count(v, key);
    else if (key == "bucket_count") c.model.embedding.bucket_count = as_count(v, key);
    else if (key == "ngram_min") c.model.embedding.ngram_min = as_count(v, key);
    else if (key == "ngram_max") c.model.embedding.ngram_max = as_count(v, key);
    else if (key == "filters") c.model.filters = as_counts(v, key);
    else if (key == "kernel_heights") c.model.kernel_heights = as_counts(v, key);
    else if (key == "dense_width") c.model.dense_width = as_count(v, key);
    else if (key == "slope") c.model.slope = as_real(v, key);
    else if (key == "attention_softmax") c.model.attention_softmax = as_bool(v, key);
    else if (key == "mask_pad") c.model.mask_pad = as_bool(v, key);
    else if (key == "learning_rate") c.train.learning_rate = as_real(v, key);
    else if (key == "epochs") c.train.epochs = as_count(v, key);
    else if (key == "batch_size") c.train.batch_size = as_count(v, key);
    else if (key == "l2_lambda") c.train.l2_lambda = as_real(v, key);
    else if (key == "patience") c.train.patience = as_count(v, key);
    else if (key == "adam_beta1") c.train.adam_beta1 = as_real(v, key);
    else if (key == "adam_beta2") c.train.adam_beta2 = as_real(v, key);
    else if (key == "adam_eps") c.train.adam_eps = as_real(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

json read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

fs::path default_slang_path() { return fs::path(QUIP_DATA_DIR) / "slang.tsv"; }

namespace {

enum class FlagKind { text, number, boolean, list };

struct FlagSpec {
  const char* flag;
  const char* key;
  FlagKind kind;
  const char* help;
};

constexpr FlagSpec kSettingFlags[] = {
    {"--dataset", "dataset", FlagKind::text, "Dataset file"},
    {"--dataset-format", "dataset_format", FlagKind::text, "jsonl, context-jsonl, context-csv or tsv"},
    {"--seed", "seed", FlagKind::number, "Seed for initialization, splitting and shuffling"},
    {"--balance", "balance", FlagKind::text, "balanced or imbalanced"},
    {"--slang", "slang", FlagKind::text, "Slang dictionary (empty string disables)"},
    {"--pretrained", "pretrained", FlagKind::text, "Pretrained word vectors (text format)"},
    {"--max-words", "max_words", FlagKind::number, "Length filter bound (default n)"},
    {"--threads", "threads", FlagKind::number, "Evaluation threads"},
    {"--n", "n", FlagKind::number, "Padded sentence length"},
    {"--d", "d", FlagKind::number, "Embedding and hidden size"},
    {"--buckets", "bucket_count", FlagKind::number, "Subword hash buckets"},
    {"--ngram-min", "ngram_min", FlagKind::number, "Shortest character n-gram"},
    {"--ngram-max", "ngram_max", FlagKind::number, "Longest character n-gram"},
    {"--filters", "filters", FlagKind::list, "Filters per conv layer, e.g. 64,64"},
    {"--kernel-heights", "kernel_heights", FlagKind::list, "Kernel height per conv layer, e.g. 2,2"},
    {"--dense-width", "dense_width", FlagKind::number, "Dense layer width (0: 4*d*k)"},
    {"--slope", "slope", FlagKind::number, "LeakyReLU slope"},
    {"--attention-softmax", "attention_softmax", FlagKind::boolean, "true or false"},
    {"--mask-pad", "mask_pad", FlagKind::boolean, "true or false"},
    {"--lr", "learning_rate", FlagKind::number, "Adam learning rate"},
    {"--epochs", "epochs", FlagKind::number, "Maximum epochs"},
    {"--batch-size", "batch_size", FlagKind::number, "Mini-batch size"},
    {"--l2", "l2_lambda", FlagKind::number, "L2 penalty on dense weights"},
    {"--patience", "patience", FlagKind::number, "Early stopping patience"},
    {"--adam-beta1", "adam_beta1", FlagKind::number, "Adam beta1"},
    {"--adam-beta2", "adam_beta2", FlagKind::number, "Adam beta2"},
    {"--adam-eps", "adam_eps", FlagKind::number, "Adam epsilon"},
};

json flag_value(const FlagSpec& spec, const std::string& raw) {
  auto parse_scalar = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::parse_error&) {
      throw ConfigError(std::string(spec.flag) + ": cannot parse '" + raw + "'");
    }
  };
  switch (spec.kind) {
    case FlagKind::text: return json(raw);
    case FlagKind::number:
    case FlagKind::boolean: return parse_scalar(raw);
    case FlagKind::list: {
      json list = json::array();
      std::stringstream ss(raw);
      for (std::string item; std::getline(ss, item, ',');) list.push_back(parse_scalar(item));
      return list;
    }
  }
  return json(raw);
}

// Options shared by every subcommand.
struct SettingOptions {
  std::string config_path;
  std::string mode;
  std::vector<std::string> values = std::vector<std::string>(std::size(kSettingFlags));
  std::vector<CLI::Option*> options;
  CLI::Option* mode_option = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    mode_option = app->add_option("--mode", mode, "reddit or twitter");
    for (std::size_t i = 0; i < std::size(kSettingFlags); ++i) {
      options.push_back(app->add_option(kSettingFlags[i].flag, values[i], kSettingFlags[i].help));
    }
  }

  RunConfig resolve() const {
    json file = json::object();
    if (!config_path.empty()) file = read_config_file(config_path);
    if (!file.is_object()) throw ConfigError("config must be a JSON object");
    Source mode_value = Source::reddit;
    if (mode_option->count() > 0) {
      mode_value = parse_source(mode);
    } else if (file.contains("mode")) {
      mode_value = parse_source(as_text(file["mode"], "mode"));
    }
    RunConfig config = mode_defaults(mode_value);
    apply_config_json(config, file);
    json flags = json::object();
    for (std::size_t i = 0; i < options.size(); ++i) {
      if (options[i]->count() > 0) flags[kSettingFlags[i].key] = flag_value(kSettingFlags[i], values[i]);
    }
    apply_config_json(config, flags);
    config.mode = mode_value;
    config.validate();
    return config;
  }
};

std::string absolute_or_empty(const std::string& path) {
  return path.empty() ? path : fs::absolute(path).lexically_normal().string();
}

// Paths in a snapshot are absolute so the snapshot works from any directory.
json snapshot(RunConfig config) {
  config.dataset = absolute_or_empty(config.dataset);
  config.slang = absolute_or_empty(config.slang);
  config.pretrained = absolute_or_empty(config.pretrained);
  return config.to_json();
}

fs::path make_run_dir(const std::string& requested, std::uint64_t seed) {
  fs::path dir;
  if (!requested.empty()) {
    dir = requested;
  } else {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::ostringstream name;
    name << std::put_time(&utc, "%Y%m%d-%H%M%S") << "-seed" << seed;
    dir = fs::path("runs") / name.str();
    for (int suffix = 2; fs::exists(dir); ++suffix) {
      dir = fs::path("runs") / (name.str() + "-" + std::to_string(suffix));
    }
  }
  fs::create_directories(dir);
  return dir;
}

void write_json_file(const fs::path& path, const json& value) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << value.dump(2) << '\n';
}

json metrics_json(const EvalMetrics& m) {
  return json{{"acc", m.accuracy}, {"macro_f1", m.macro_f1}, {"precision", m.precision}, {"recall", m.recall},
              {"tp", m.tp},        {"fp", m.fp},             {"fn", m.fn},               {"tn", m.tn}};
}

Preprocessor make_preprocessor(const RunConfig& config) {
  SlangDictionary slang;
  if (!config.slang.empty()) {
    if (!fs::is_regular_file(config.slang)) throw ConfigError("slang file '" + config.slang + "' does not exist");
    slang = SlangDictionary::load(config.slang);
  }
  return Preprocessor(std::move(slang), config.model.n);
}

std::vector<RawPair> load_filtered(const RunConfig& config) {
  if (config.dataset.empty()) throw ConfigError("no dataset given (use --dataset or the 'dataset' config key)");
  if (!fs::is_regular_file(config.dataset)) throw ConfigError("dataset '" + config.dataset + "' does not exist");
  std::optional<DatasetFormat> format;
  if (!config.dataset_format.empty()) format = parse_dataset_format(config.dataset_format);
  return filter_by_length(load_dataset(config.dataset, format, config.mode), config.resolved_max_words());
}

QuipModel build_model(const RunConfig& config) {
  QuipModel model(config.model, config.seed);
  if (!config.pretrained.empty()) {
    if (!fs::is_regular_file(config.pretrained)) {
      throw ConfigError("pretrained vectors '" + config.pretrained + "' do not exist");
    }
    model.load_pretrained(config.pretrained);
  }
  return model;
}

const StoredTensor* find_stored(const std::vector<StoredTensor>& stored, const std::string& name) {
  for (const auto& s : stored) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

// Weight files must match the configured architecture. Mismatches are
// reported as configuration errors naming both sides.
void load_compatible_weights(QuipModel& model, const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("weights file '" + path.string() + "' does not exist");
  const auto stored = load_weights(path);
  const std::size_t d = model.config().d();
  if (const auto* w = find_stored(stored, "encoder.comment.fwd.w_input"); w && w->shape.size() == 2 && w->shape[1] != d) {
    throw ConfigError("dimension mismatch: weights have d=" + std::to_string(w->shape[1]) + ", config has d=" +
                      std::to_string(d));
  }
  try {
    assign_weights(model.parameters(), stored);
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("weights do not match the configuration: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(std::string("weights do not match the configuration: ") + e.what());
  }
}

void print_metrics(std::ostream& out, const EvalMetrics& m) {
  out << std::setprecision(6) << std::fixed;
  out << "accuracy  " << m.accuracy << '\n'
      << "macro_f1  " << m.macro_f1 << '\n'
      << "precision " << m.precision << '\n'
      << "recall    " << m.recall << '\n';
  out.unsetf(std::ios::floatfield);
  out << "tp " << m.tp << "  fp " << m.fp << "  fn " << m.fn << "  tn " << m.tn << '\n';
}

// ---- preprocess ------------------------------------------------------------

struct PreprocessArgs {
  SettingOptions settings;
  std::string out_dir;
};

json token_stats(const std::vector<RawPair>& pairs, const Preprocessor& prep) {
  const auto counts = count_classes(pairs);
  double comment_tokens = 0.0, reply_tokens = 0.0, comment_words = 0.0, reply_words = 0.0;
  for (const auto& p : pairs) {
    comment_tokens += static_cast<double>(prep.tokens(p.comment).size());
    reply_tokens += static_cast<double>(prep.tokens(p.reply).size());
    comment_words += static_cast<double>(whitespace_word_count(p.comment));
    reply_words += static_cast<double>(whitespace_word_count(p.reply));
  }
  const double n = pairs.empty() ? 1.0 : static_cast<double>(pairs.size());
  return json{{"pairs", pairs.size()},
              {"positive", counts.positive},
              {"negative", counts.negative},
              {"avg_comment_words", comment_words / n},
              {"avg_reply_words", reply_words / n},
              {"avg_comment_tokens", comment_tokens / n},
              {"avg_reply_tokens", reply_tokens / n}};
}

int cmd_preprocess(const PreprocessArgs& args, std::ostream& out) {
  const RunConfig config = args.settings.resolve();
  const auto pairs = load_filtered(config);
  const auto split = make_split(pairs, config.balance, config.seed);
  const auto prep = make_preprocessor(config);
  const fs::path dir = make_run_dir(args.out_dir, config.seed);

  auto write_split = [&](const char* name, const std::vector<RawPair>& rows) {
    std::ofstream f(dir / (std::string(name) + ".jsonl"));
    if (!f) throw std::runtime_error("cannot write into '" + dir.string() + "'");
    write_jsonl(f, rows);
  };
  write_split("train", split.train);
  write_split("validation", split.validation);
  write_split("test", split.test);
  // Counts are per exploded pair (one context tweet each).
  write_json_file(dir / "stats.json", json{{"filtered", token_stats(pairs, prep)},
                                           {"train", token_stats(split.train, prep)},
                                           {"validation", token_stats(split.validation, prep)},
                                           {"test", token_stats(split.test, prep)}});
  write_json_file(dir / "config.json", snapshot(config));
  out << "pairs after length filter: " << pairs.size() << '\n'
      << "train " << split.train.size() << "  validation " << split.validation.size() << "  test "
      << split.test.size() << '\n'
      << "wrote " << dir.string() << '\n';
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  SettingOptions settings;
  std::string out_dir;
};

int cmd_train(const TrainArgs& args, std::ostream& out) {
  const RunConfig config = args.settings.resolve();
  const auto raw = make_split(load_filtered(config), config.balance, config.seed);
  const auto data = tokenize_split(raw, make_preprocessor(config));
  if (data.train.empty() || data.validation.empty()) {
    throw ConfigError("dataset too small: train has " + std::to_string(data.train.size()) + " pairs, validation " +
                      std::to_string(data.validation.size()));
  }
  QuipModel model = build_model(config);
  const fs::path dir = make_run_dir(args.out_dir, config.seed);
  write_json_file(dir / "config.json", snapshot(config));

  out << "train " << data.train.size() << "  validation " << data.validation.size() << "  test "
      << data.test.size() << "  parameters " << model.parameters().scalar_count() << '\n';
  const auto history = train(model, data.train, data.validation, config.train, [&out](const EpochRecord& r) {
    out << "epoch " << r.epoch << "  train_loss " << r.train_loss << "  val_loss " << r.val_loss << "  val_acc "
        << r.val_metrics.accuracy << "  val_f1 " << r.val_metrics.macro_f1 << std::endl;
  });

  save_weights(dir / "weights.txt", model.parameters());
  std::ofstream hist(dir / "history.jsonl");
  if (!hist) throw std::runtime_error("cannot write history into '" + dir.string() + "'");
  write_history_jsonl(hist, history);
  out << "best epoch " << history.best_epoch << " of " << history.stopped_epoch
      << (history.stopped_early ? " (stopped early)" : "") << '\n'
      << "wrote " << dir.string() << '\n';
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  SettingOptions settings;
  std::string weights;
  std::string split = "test";
  std::string out_dir;
  std::string predictions_out;
};

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const RunConfig config = args.settings.resolve();
  QuipModel model = build_model(config);
  load_compatible_weights(model, args.weights);
  const auto pairs = load_filtered(config);
  const auto prep = make_preprocessor(config);

  std::vector<RawPair> rows;
  if (args.split == "all") {
    rows = pairs;
  } else {
    auto split = make_split(pairs, config.balance, config.seed);
    rows = args.split == "train" ? split.train : args.split == "validation" ? split.validation : split.test;
  }
  if (rows.empty()) throw ConfigError("the " + args.split + " split is empty");

  std::vector<TokenizedPair> tokenized;
  for (const auto& p : rows) tokenized.push_back(prep.prepare(p.comment, p.reply, p.label));
  const auto encoded = encode_all(model, tokenized);
  const auto predictions = predict_all(model, encoded, config.threads);
  std::vector<double> labels;
  for (const auto& p : rows) labels.push_back(p.label);
  const EvalMetrics metrics = compute_metrics(predictions, labels);

  out << "split " << args.split << "  pairs " << rows.size() << '\n';
  print_metrics(out, metrics);
  const fs::path dir = args.out_dir.empty() ? fs::path(args.weights).parent_path() : fs::path(args.out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  json record = metrics_json(metrics);
  record["split"] = args.split;
  write_json_file(dir / "metrics.json", record);
  if (!args.predictions_out.empty()) {
    std::ofstream f(args.predictions_out);
    if (!f) throw std::runtime_error("cannot write '" + args.predictions_out + "'");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      f << json{{"comment", rows[i].comment}, {"reply", rows[i].reply}, {"label", rows[i].label},
                {"prediction", predictions[i]}}
               .dump()
        << '\n';
    }
  }
  return kExitOk;
}

// ---- predict and export-attention -------------------------------------------

struct PairInput {
  std::string comment;
  std::string reply;
};

std::vector<PairInput> read_pair_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::vector<PairInput> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    for (const char* field : {"comment", "reply"}) {
      if (!j.is_object() || !j.contains(field) || !j[field].is_string()) {
        throw ParseError(std::string("missing string field '") + field + "'", line_no);
      }
    }
    out.push_back({j["comment"].get<std::string>(), j["reply"].get<std::string>()});
  }
  return out;
}

struct PairArgs {
  SettingOptions settings;
  std::string weights;
  std::string comment;
  std::string reply;
  std::string input;
  std::string out_path;
  CLI::Option* comment_option = nullptr;
  CLI::Option* reply_option = nullptr;

  std::vector<PairInput> pairs() const {
    const bool inline_pair = comment_option->count() > 0 || reply_option->count() > 0;
    if (inline_pair == !input.empty()) throw UsageError("give either --comment and --reply, or --input");
    if (inline_pair) {
      if (comment_option->count() == 0 || reply_option->count() == 0) {
        throw UsageError("--comment and --reply must be given together");
      }
      return {{comment, reply}};
    }
    return read_pair_lines(input);
  }
};

std::ostream& output_stream(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty()) return fallback;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write '" + path + "'");
  return file;
}

int cmd_predict(const PairArgs& args, std::ostream& out) {
  const RunConfig config = args.settings.resolve();
  QuipModel model = build_model(config);
  load_compatible_weights(model, args.weights);
  const auto prep = make_preprocessor(config);
  std::ofstream file;
  std::ostream& sink = output_stream(args.out_path, file, out);
  for (const auto& p : args.pairs()) {
    const double y = model.predict(model.encode(prep.prepare(p.comment, p.reply, 0)));
    sink << json{{"comment", p.comment}, {"reply", p.reply}, {"prediction", y},
                 {"label", y >= kDecisionThreshold ? 1 : 0}}
                .dump()
         << '\n';
  }
  return kExitOk;
}

json min_max(const std::vector<double>& raw) {
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  std::vector<double> out(raw.size(), 0.0);
  if (*hi > *lo) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - *lo) / (*hi - *lo);
  }
  return out;
}

Tokens visible_tokens(const Tokens& tokens, std::size_t n) {
  return Tokens(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(std::min(n, tokens.size())));
}

int cmd_export_attention(const PairArgs& args, std::ostream& out) {
  const RunConfig config = args.settings.resolve();
  const auto inputs = args.pairs();
  if (inputs.size() != 1) throw UsageError("export-attention takes exactly one pair, got " + std::to_string(inputs.size()));
  const auto prep = make_preprocessor(config);
  const auto& pair = inputs.front();
  const Tokens comment_tokens = visible_tokens(prep.tokens(pair.comment), config.model.n);
  const Tokens reply_tokens = visible_tokens(prep.tokens(pair.reply), config.model.n);
  if (comment_tokens.empty()) throw UsageError("comment is empty after tokenization");
  if (reply_tokens.empty()) throw UsageError("reply is empty after tokenization");

  QuipModel model = build_model(config);
  load_compatible_weights(model, args.weights);
  const EncodedPair encoded = model.encode(prep.prepare(pair.comment, pair.reply, 0));
  NoGradGuard no_grad;
  const ForwardResult r = model.forward(encoded);

  struct MapSpec {
    const char* name;
    const char* cell;
    const char* direction;
    const char* positions;
    const Tensor* scores;
  };
  const MapSpec specs[] = {
      {"comment_forward_cell", "comment", "forward", "reply", &r.maps.fwd_cu},
      {"comment_backward_cell", "comment", "backward", "reply", &r.maps.bwd_cu},
      {"reply_forward_cell", "reply", "forward", "comment", &r.maps.fwd_cv},
      {"reply_backward_cell", "reply", "backward", "comment", &r.maps.bwd_cv},
  };
  json maps = json::array();
  for (const auto& s : specs) {
    const std::vector<double> raw(s.scores->values().begin(), s.scores->values().end());
    maps.push_back(json{{"name", s.name},
                    {"cell", s.cell},
                    {"direction", s.direction},
                    {"positions", s.positions},
                    {"raw", raw},
                    {"normalized", min_max(raw)}});
  }
  const json doc{{"format", "quip-attention"},
                 {"version", 1},
                 {"n", config.model.n},
                 {"comment", {{"text", pair.comment}, {"tokens", comment_tokens}}},
                 {"reply", {{"text", pair.reply}, {"tokens", reply_tokens}}},
                 {"maps", maps},
                 {"prediction", r.prediction.item()}};
  std::ofstream file;
  output_stream(args.out_path, file, out) << doc.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Comment/reply sarcasm classifier", "quip"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "Filter, balance and split a dataset");
  pre.settings.attach(pre_cmd);
  pre_cmd->add_option("--out", pre.out_dir, "Output directory (default runs/<timestamp>-seed<N>)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write weights, history and config");
  tr.settings.attach(train_cmd);
  train_cmd->add_option("--out", tr.out_dir, "Run directory (default runs/<timestamp>-seed<N>)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate weights on a split");
  ev.settings.attach(eval_cmd);
  eval_cmd->add_option("--weights", ev.weights, "Weights file")->required();
  eval_cmd->add_option("--split", ev.split, "test, validation, train or all")
      ->check(CLI::IsMember({"test", "validation", "train", "all"}));
  eval_cmd->add_option("--out", ev.out_dir, "Directory for metrics.json (default: next to the weights)");
  eval_cmd->add_option("--predictions-out", ev.predictions_out, "Write per-pair predictions as JSONL");

  auto attach_pair = [](CLI::App* cmd, PairArgs& a) {
    a.settings.attach(cmd);
    cmd->add_option("--weights", a.weights, "Weights file")->required();
    a.comment_option = cmd->add_option("--comment", a.comment, "Comment text");
    a.reply_option = cmd->add_option("--reply", a.reply, "Reply text");
    cmd->add_option("--input", a.input, "JSONL file of {comment, reply} objects");
    cmd->add_option("--out", a.out_path, "Output file (default stdout)");
  };
  PairArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Score comment/reply pairs");
  attach_pair(predict_cmd, pr);
  PairArgs ex;
  auto* export_cmd = app.add_subcommand("export-attention", "Export the four attention maps of one pair as JSON");
  attach_pair(export_cmd, ex);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*pre_cmd) return cmd_preprocess(pre, out);
    if (*train_cmd) return cmd_train(tr, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*predict_cmd) return cmd_predict(pr, out);
    if (*export_cmd) return cmd_export_attention(ex, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFault;
  }
  return kExitUsage;
}

}  // namespace quip
