#include "secs/cli.hpp"

#include "secs/io.hpp"
#include "secs/json_convert.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <set>

namespace secs::cli {

using nlohmann::json;

void AocSettings::validate() const {
  if (window < 1)
    throw ConfigError("aoc", "window must be >= 1 year");
  if (!(threshold_pct > 0.0 && threshold_pct < 100.0))
    throw ConfigError("aoc", "threshold_pct must lie in (0, 100)");
}

void RunConfig::validate() const {
  synthdata.validate();
  scenario.validate();
  crop.validate();
  training.validate();
  qdm.validate();
  aoc.validate();
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const char* env_seed) {
  RunConfig cfg;
  if (env_seed && *env_seed) {
    std::uint64_t seed = 0;
    const char* end = env_seed + std::strlen(env_seed);
    const auto [ptr, ec] = std::from_chars(env_seed, end, seed);
    if (ec != std::errc() || ptr != end)
      throw ConfigError("config", std::string("SECS_SEED is not an unsigned integer: '") + env_seed + "'");
    cfg.synthdata.seed = seed;
    cfg.training.seed = seed;
  }
  if (path) {
    if (!std::filesystem::exists(*path))
      throw IoError("config", "config file not found: '" + path->string() + "'");
    json doc;
    try {
      doc = json::parse(read_text_file(*path));
    } catch (const json::exception& e) {
      throw ConfigError("config", "'" + path->string() + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_object())
      throw ConfigError("config", "top level of '" + path->string() + "' must be an object");
    static const std::set<std::string> known = {"synthdata", "scenario", "crop", "features",
                                                "training", "qdm", "aoc"};
    for (auto it = doc.begin(); it != doc.end(); ++it)
      if (!known.count(it.key()))
        throw ConfigError("config", "unknown module key '" + it.key() + "' in '" + path->string() + "'");
    if (doc.contains("synthdata"))
      read_json(doc["synthdata"], cfg.synthdata);
    if (doc.contains("scenario"))
      read_json(doc["scenario"], cfg.scenario);
    if (doc.contains("crop"))
      read_json(doc["crop"], cfg.crop);
    if (doc.contains("training"))
      read_json(doc["training"], cfg.training);
    if (doc.contains("features"))
      read_json(doc["features"], cfg.training.features);
    if (doc.contains("qdm"))
      read_json(doc["qdm"], cfg.qdm);
    if (doc.contains("aoc")) {
      const json& a = doc["aoc"];
      if (!a.is_object())
        throw ConfigError("config", "aoc must be a JSON object");
      for (auto it = a.begin(); it != a.end(); ++it) {
        try {
          if (it.key() == "window")
            cfg.aoc.window = it->get<int>();
          else if (it.key() == "threshold_pct")
            cfg.aoc.threshold_pct = it->get<double>();
          else
            throw ConfigError("config", "unknown key '" + it.key() + "' in aoc");
        } catch (const json::exception& e) {
          throw ConfigError("config", "aoc." + it.key() + ": " + e.what());
        }
      }
    }
  }
  cfg.validate();
  return cfg;
}

json to_json(const RunConfig& config) {
  return {{"synthdata", to_json(config.synthdata)},
          {"scenario", {{"warming", config.scenario.warming},
                        {"precip_factor", config.scenario.precip_factor}}},
          {"crop", to_json(config.crop)},
          {"features", to_json(config.training.features)},
          {"training", to_json(config.training)},
          {"qdm", to_json(config.qdm)},
          {"aoc", {{"window", config.aoc.window}, {"threshold_pct", config.aoc.threshold_pct}}}};
}

} // namespace secs::cli
