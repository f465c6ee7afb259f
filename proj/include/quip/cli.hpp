#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "quip/data_io.hpp"
#include "quip/model.hpp"
#include "quip/training.hpp"

namespace quip {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFault = 1;
inline constexpr int kExitUsage = 2;

// Everything a command needs. Values resolve in this order, later wins:
// built-in defaults, the defaults of the selected mode, the config file,
// command-line flags.
struct RunConfig {
  Source mode = Source::reddit;
  BalanceMode balance = BalanceMode::balanced;
  std::uint64_t seed = 1;
  std::string dataset;
  std::string dataset_format;  // empty: detect from the file
  std::string slang;           // empty: no slang expansion
  std::string pretrained;      // empty: hashed subword vectors only
  std::size_t max_words = 0;   // 0: use n
  unsigned threads = 1;
  ModelConfig model;
  TrainConfig train;

  std::size_t resolved_max_words() const noexcept { return max_words == 0 ? model.n : max_words; }
  void validate() const;
  nlohmann::json to_json() const;
};

// Built-in defaults with the per-mode sequence length and batch size applied.
RunConfig mode_defaults(Source mode);

// Overwrites the fields present in `j`. Unknown keys and wrongly typed values
// are ConfigErrors.
void apply_config_json(RunConfig& config, const nlohmann::json& j);
nlohmann::json read_config_file(const std::filesystem::path& path);

// Slang file shipped with the sources.
std::filesystem::path default_slang_path();

// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace quip
