#ifndef SECS_JSON_CONVERT_HPP
#define SECS_JSON_CONVERT_HPP

#include "secs/climateadjust.hpp"
#include "secs/features.hpp"
#include "secs/synthdata.hpp"
#include "secs/training.hpp"

#include <json.hpp>

namespace secs {

// Readers overlay the keys present in `j` onto `out` and reject unknown keys
// with ConfigError; writers emit every field.

void read_json(const nlohmann::json& j, FeatureSpec& out);
void read_json(const nlohmann::json& j, TrainConfig& out);
void read_json(const nlohmann::json& j, WeatherGenConfig& out);
void read_json(const nlohmann::json& j, CropParams& out);
void read_json(const nlohmann::json& j, ScenarioDelta& out);
void read_json(const nlohmann::json& j, BiasAdjustSettings& out);

nlohmann::json to_json(const FeatureSpec& v);
nlohmann::json to_json(const TrainConfig& v);
nlohmann::json to_json(const WeatherGenConfig& v);
nlohmann::json to_json(const CropParams& v);
nlohmann::json to_json(const BiasAdjustSettings& v);

} // namespace secs

#endif // SECS_JSON_CONVERT_HPP
