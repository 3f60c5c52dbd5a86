#ifndef SECS_CLI_HPP
#define SECS_CLI_HPP

#include "secs/climateadjust.hpp"
#include "secs/error.hpp"
#include "secs/synthdata.hpp"
#include "secs/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace secs::cli {

inline constexpr const char* kVersion = "1.0.0";

/// Bad verb, bad flag, bad flag value or missing required flag (exit 2).
class UsageError : public Error {
public:
  explicit UsageError(const std::string& message) : Error("cli", message) {}
};

/// `--help` anywhere on the command line; carries the text to print.
struct HelpRequest {
  std::string text;
};

struct Command {
  std::string verb;
  std::map<std::string, std::string> options; ///< flags given explicitly, without "--"
  std::optional<std::filesystem::path> config_path;

  bool has(const std::string& flag) const { return options.count(flag) != 0; }
};

const std::vector<std::string>& verbs();

/// Throws UsageError or HelpRequest. `args` excludes the program name.
Command parse_cli(const std::vector<std::string>& args);

/// Top-level usage followed by the help of every verb.
std::string usage_text();

struct AocSettings {
  int window = 10;
  double threshold_pct = 5.0;

  void validate() const;
};

/// Module configs keyed by module name in one JSON document:
/// synthdata, scenario, crop, features, training, qdm, aoc.
struct RunConfig {
  WeatherGenConfig synthdata;
  ScenarioDelta scenario;
  CropParams crop = crop_preset("maizelike");
  TrainConfig training;
  BiasAdjustSettings qdm;
  AocSettings aoc;

  void validate() const;
};

/// Defaults, then `env_seed` (SECS_SEED), then the config file. Explicit
/// flags are layered on top by `run`.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const char* env_seed);

nlohmann::json to_json(const RunConfig& config);

/// Returns the exit status: 0 success, 1 domain error, 2 usage error.
int run(const Command& command, std::ostream& out, std::ostream& err);

/// parse_cli + run with uniform error reporting.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace secs::cli

#endif // SECS_CLI_HPP
