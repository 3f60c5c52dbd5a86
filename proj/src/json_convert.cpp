#include "secs/json_convert.hpp"

#include "secs/error.hpp"

#include <set>

namespace secs {
namespace {

using nlohmann::json;

class ObjectReader {
public:
  ObjectReader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object())
      throw ConfigError("config", context_ + " must be a JSON object");
  }

  template <typename T>
  ObjectReader& get(const char* key, T& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        out = it->template get<T>();
      } catch (const json::exception& e) {
        throw ConfigError("config", context_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }

  template <typename Fn>
  ObjectReader& nested(const char* key, Fn&& fn) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end())
      fn(*it);
    return *this;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("config", "unknown key '" + it.key() + "' in " + context_);
  }

private:
  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

} // namespace

void read_json(const json& j, FeatureSpec& out) {
  ObjectReader(j, "features")
      .get("lags", out.lags)
      .get("include_doy", out.include_doy)
      .get("batch_len", out.batch_len)
      .finish();
}

void read_json(const json& j, TrainConfig& out) {
  ObjectReader(j, "training")
      .get("epochs", out.epochs)
      .get("minibatch_size", out.minibatch_size)
      .get("learning_rate", out.learning_rate)
      .get("beta1", out.beta1)
      .get("beta2", out.beta2)
      .get("epsilon", out.epsilon)
      .get("huber_delta", out.huber_delta)
      .get("dropout_rate", out.dropout_rate)
      .get("split_ratio", out.split_ratio)
      .get("seed", out.seed)
      .get("early_stop_patience", out.early_stop_patience)
      .get("hidden", out.hidden)
      .nested("features", [&](const json& f) { read_json(f, out.features); })
      .finish();
}

void read_json(const json& j, WeatherGenConfig& out) {
  ObjectReader(j, "synthdata")
      .get("n_cells", out.n_cells)
      .get("n_years", out.n_years)
      .get("seed", out.seed)
      .get("start_year", out.start_year)
      .get("mean_annual_t", out.mean_annual_t)
      .get("seasonal_amplitude", out.seasonal_amplitude)
      .get("t_noise_sd", out.t_noise_sd)
      .get("ar1_coeff", out.ar1_coeff)
      .get("wet_day_prob", out.wet_day_prob)
      .get("wetwet_prob", out.wetwet_prob)
      .get("rain_shape", out.rain_shape)
      .get("rain_scale", out.rain_scale)
      .get("lat_gradient", out.lat_gradient)
      .get("diurnal_range", out.diurnal_range)
      .finish();
}

void read_json(const json& j, CropParams& out) {
  if (j.is_string()) {
    out = crop_preset(j.get<std::string>());
    return;
  }
  // An object may start from a preset and override individual fields.
  if (j.is_object() && j.contains("preset"))
    out = crop_preset(j.at("preset").get<std::string>());
  std::string preset;
  ObjectReader(j, "crop")
      .get("preset", preset)
      .get("name", out.name)
      .get("sow_doy", out.sow_doy)
      .get("t_base", out.t_base)
      .get("t_opt", out.t_opt)
      .get("t_max", out.t_max)
      .get("gdd_emerge", out.gdd_emerge)
      .get("gdd_anthesis", out.gdd_anthesis)
      .get("gdd_maturity", out.gdd_maturity)
      .get("g_max", out.g_max)
      .get("p_so", out.p_so)
      .get("w_cap", out.w_cap)
      .get("w_init_frac", out.w_init_frac)
      .get("et_coeff", out.et_coeff)
      .finish();
}

void read_json(const json& j, ScenarioDelta& out) {
  ObjectReader(j, "scenario")
      .get("warming", out.warming)
      .get("precip_factor", out.precip_factor)
      .finish();
}

void read_json(const json& j, BiasAdjustSettings& out) {
  std::string tmax = to_string(out.tmax_kind), tmin = to_string(out.tmin_kind),
              precip = to_string(out.precip_kind);
  ObjectReader(j, "qdm")
      .get("tmax_kind", tmax)
      .get("tmin_kind", tmin)
      .get("precip_kind", precip)
      .get("n_quantiles", out.n_quantiles)
      .get("trace", out.trace)
      .get("monthly", out.monthly)
      .finish();
  out.tmax_kind = parse_qdm_kind(tmax);
  out.tmin_kind = parse_qdm_kind(tmin);
  out.precip_kind = parse_qdm_kind(precip);
}

json to_json(const FeatureSpec& v) {
  return {{"lags", v.lags}, {"include_doy", v.include_doy}, {"batch_len", v.batch_len}};
}

json to_json(const TrainConfig& v) {
  return {{"epochs", v.epochs},
          {"minibatch_size", v.minibatch_size},
          {"learning_rate", v.learning_rate},
          {"beta1", v.beta1},
          {"beta2", v.beta2},
          {"epsilon", v.epsilon},
          {"huber_delta", v.huber_delta},
          {"dropout_rate", v.dropout_rate},
          {"split_ratio", v.split_ratio},
          {"seed", v.seed},
          {"early_stop_patience", v.early_stop_patience},
          {"hidden", v.hidden},
          {"features", to_json(v.features)}};
}

json to_json(const WeatherGenConfig& v) {
  return {{"n_cells", v.n_cells},
          {"n_years", v.n_years},
          {"seed", v.seed},
          {"start_year", v.start_year},
          {"mean_annual_t", v.mean_annual_t},
          {"seasonal_amplitude", v.seasonal_amplitude},
          {"t_noise_sd", v.t_noise_sd},
          {"ar1_coeff", v.ar1_coeff},
          {"wet_day_prob", v.wet_day_prob},
          {"wetwet_prob", v.wetwet_prob},
          {"rain_shape", v.rain_shape},
          {"rain_scale", v.rain_scale},
          {"lat_gradient", v.lat_gradient},
          {"diurnal_range", v.diurnal_range}};
}

json to_json(const CropParams& v) {
  return {{"name", v.name},
          {"sow_doy", v.sow_doy},
          {"t_base", v.t_base},
          {"t_opt", v.t_opt},
          {"t_max", v.t_max},
          {"gdd_emerge", v.gdd_emerge},
          {"gdd_anthesis", v.gdd_anthesis},
          {"gdd_maturity", v.gdd_maturity},
          {"g_max", v.g_max},
          {"p_so", v.p_so},
          {"w_cap", v.w_cap},
          {"w_init_frac", v.w_init_frac},
          {"et_coeff", v.et_coeff}};
}

json to_json(const BiasAdjustSettings& v) {
  return {{"tmax_kind", to_string(v.tmax_kind)},
          {"tmin_kind", to_string(v.tmin_kind)},
          {"precip_kind", to_string(v.precip_kind)},
          {"n_quantiles", v.n_quantiles},
          {"trace", v.trace},
          {"monthly", v.monthly}};
}

} // namespace secs
