#pragma once

// Command-line front end: config resolution (JSON file + flag overrides) and
// the fit / denoise / analyze / synth / sweep pipelines.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "siren2/error.hpp"
#include "siren2/network.hpp"
#include "siren2/signal.hpp"
#include "siren2/training.hpp"

namespace siren2::cli {

enum class Command { Fit, Denoise, Analyze, Synth, Sweep };

const char* to_string(Command command);

/// Bad flags, bad config values or missing inputs.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutRootEnv = "SIREN2_OUT_ROOT";

struct RunConfig {
  Command command = Command::Fit;
  std::filesystem::path input;
  std::filesystem::path params_path;  // analyze
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::string hyper_preset = "audio";  // "audio", "image" or "custom"
  Interval coord_range{-1.0, 1.0};
  NetworkConfig net;
  TrainConfig train;

  // synth
  std::size_t synth_n = 4096;
  std::size_t synth_count = 8;
  double synth_max_mask = 0.9;

  // denoise
  double snr_db = 5.0;

  // sweep
  std::vector<double> s0_values;
  std::vector<double> s1_values;

  nlohmann::json to_json() const;
};

/// Parses `argv` (argv[0] is the program name). A `--config file.json` is
/// applied first and explicit flags override it. Unknown keys or flags,
/// bad values and missing inputs raise UsageError.
RunConfig parse_config(const std::vector<std::string>& args);

/// Applies a JSON config object on top of `config`. Unknown keys raise UsageError.
void apply_json(RunConfig& config, const nlohmann::json& json);

/// Validates cross-field constraints (input presence, value ranges).
void validate(const RunConfig& config);

/// Executes the command and writes its artifacts. Returns the process exit
/// status; errors are reported on stderr.
int run(const RunConfig& config);

/// parse_config + run with usage/runtime error reporting.
int main_entry(const std::vector<std::string>& args);

}  // namespace siren2::cli
