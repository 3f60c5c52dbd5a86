#include "secs/synthdata.hpp"

#include "secs/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace secs {
namespace {

constexpr const char* kModule = "synthdata";

double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::mt19937_64 cell_stream(std::uint64_t seed, int cell_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(cell_index), 0x5EC5u};
  return std::mt19937_64(seq);
}

std::string cell_name(int index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "c%04d", index);
  return buf;
}

} // namespace

void WeatherGenConfig::validate() const {
  if (n_cells < 1 || n_years < 1)
    throw ConfigError(kModule, "n_cells and n_years must be >= 1");
  if (!is_probability(wet_day_prob) || !is_probability(wetwet_prob))
    throw ConfigError(kModule, "wet_day_prob and wetwet_prob must lie in [0,1]");
  if (!(rain_shape > 0) || !(rain_scale > 0))
    throw ConfigError(kModule, "rain_shape and rain_scale must be > 0");
  if (!(t_noise_sd >= 0))
    throw ConfigError(kModule, "t_noise_sd must be >= 0");
  if (!(ar1_coeff >= 0 && ar1_coeff < 1))
    throw ConfigError(kModule, "ar1_coeff must lie in [0,1)");
  if (!(diurnal_range >= 0))
    throw ConfigError(kModule, "diurnal_range must be >= 0");
  if (!std::isfinite(mean_annual_t) || !std::isfinite(seasonal_amplitude) ||
      !std::isfinite(lat_gradient))
    throw ConfigError(kModule, "temperature parameters must be finite");
}

void ScenarioDelta::validate() const {
  if (!(precip_factor > 0) || !std::isfinite(warming))
    throw ConfigError(kModule, "precip_factor must be > 0 and warming finite");
}

void CropParams::validate() const {
  if (sow_doy < 1 || sow_doy > kDaysPerYear)
    throw ConfigError(kModule, "sow_doy must lie in 1..365");
  if (!(t_base < t_opt && t_opt < t_max))
    throw ConfigError(kModule, "require t_base < t_opt < t_max");
  if (!(0 < gdd_emerge && gdd_emerge < gdd_anthesis && gdd_anthesis < gdd_maturity))
    throw ConfigError(kModule, "require 0 < gdd_emerge < gdd_anthesis < gdd_maturity");
  if (!(g_max >= 0) || !(et_coeff >= 0))
    throw ConfigError(kModule, "g_max and et_coeff must be >= 0");
  if (!(p_so > 0 && p_so <= 1))
    throw ConfigError(kModule, "p_so must lie in (0,1]");
  if (!(w_cap > 0))
    throw ConfigError(kModule, "w_cap must be > 0");
  if (!is_probability(w_init_frac))
    throw ConfigError(kModule, "w_init_frac must lie in [0,1]");
}

CropParams crop_preset(const std::string& name) {
  CropParams p;
  p.name = name;
  if (name == "maizelike")
    return p;
  if (name == "barleylike") {
    p.sow_doy = 70;
    p.t_base = 2.0;
    p.t_opt = 20.0;
    p.t_max = 32.0;
    p.gdd_emerge = 120.0;
    p.gdd_anthesis = 800.0;
    p.gdd_maturity = 1350.0;
    p.g_max = 180.0;
    p.p_so = 0.55;
    p.w_cap = 120.0;
    p.w_init_frac = 0.8;
    p.et_coeff = 0.18;
    return p;
  }
  throw ConfigError(kModule, "unknown crop preset '" + name +
                                 "' (expected maizelike or barleylike)");
}

std::vector<WeatherSeries> generate_weather(const WeatherGenConfig& config) {
  config.validate();
  const int n_days = config.n_years * kDaysPerYear;
  const double pi = config.wet_day_prob;
  const double p11 = config.wetwet_prob;
  // Dry->wet transition chosen so the stationary wet fraction equals pi.
  const double p01 = pi >= 1.0 ? 1.0 : std::min(1.0, pi * (1.0 - p11) / (1.0 - pi));
  const double innovation_sd = config.t_noise_sd * std::sqrt(1.0 - config.ar1_coeff * config.ar1_coeff);

  std::vector<WeatherSeries> out(static_cast<std::size_t>(config.n_cells));
  for (int c = 0; c < config.n_cells; ++c) {
    auto gen = cell_stream(config.seed, c);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::gamma_distribution<double> rain(config.rain_shape, config.rain_scale);

    WeatherSeries& w = out[static_cast<std::size_t>(c)];
    const double frac = config.n_cells > 1 ? double(c) / (config.n_cells - 1) : 0.0;
    w.cell = CellId{cell_name(c), 35.0 + 25.0 * frac, -10.0 + 2.0 * (c % 20)};
    w.start_year = config.start_year;
    w.tmax.resize(n_days);
    w.tmin.resize(n_days);
    w.precip.resize(n_days);

    const double base = config.mean_annual_t - config.lat_gradient * c;
    const double half_range = 0.5 * config.diurnal_range;
    double noise = config.t_noise_sd * normal(gen);
    bool wet = pi >= 1.0 || (pi > 0.0 && unit_uniform(gen) < pi);
    for (int d = 0; d < n_days; ++d) {
      if (d > 0) {
        noise = config.ar1_coeff * noise + innovation_sd * normal(gen);
        if (pi >= 1.0)
          wet = true;
        else if (pi <= 0.0)
          wet = false;
        else
          wet = unit_uniform(gen) < (wet ? p11 : p01);
      }
      const int doy = d % kDaysPerYear + 1;
      const double cycle =
          config.seasonal_amplitude * std::sin(2.0 * std::numbers::pi * (doy - 105) / kDaysPerYear);
      const double tmean = base + cycle + noise;
      w.tmax[d] = tmean + half_range;
      w.tmin[d] = tmean - half_range;
      w.precip[d] = wet ? rain(gen) : 0.0;
    }
  }
  return out;
}

WeatherSeries apply_scenario(const WeatherSeries& weather, const ScenarioDelta& delta) {
  delta.validate();
  WeatherSeries out = weather;
  out.tmax.array() += delta.warming;
  out.tmin.array() += delta.warming;
  out.precip *= delta.precip_factor;
  return out;
}

YieldSeries simulate_crop(const WeatherSeries& weather, const CropParams& crop) {
  crop.validate();
  if (weather.n_days() == 0 || weather.n_days() % kDaysPerYear != 0)
    throw ShapeError(kModule, "weather length must be a whole number of 365-day years");

  YieldSeries y;
  y.cell = weather.cell;
  y.start_year = weather.start_year;
  y.twso = Eigen::VectorXd::Zero(weather.n_days());

  const double ramp_up = crop.t_opt - crop.t_base;
  const double ramp_down = crop.t_max - crop.t_opt;
  auto temperature_factor = [&](double t) {
    if (t <= crop.t_base || t >= crop.t_max)
      return 0.0;
    if (t <= crop.t_opt)
      return (t - crop.t_base) / ramp_up;
    return (crop.t_max - t) / ramp_down;
  };

  for (int year = 0; year < weather.n_years(); ++year) {
    const Eigen::Index off = static_cast<Eigen::Index>(year) * kDaysPerYear;
    double w = crop.w_init_frac * crop.w_cap;
    double gdd = 0.0;
    double twso = 0.0;
    bool mature = false;
    for (int doy = crop.sow_doy; doy <= kDaysPerYear; ++doy) {
      const Eigen::Index d = off + doy - 1;
      if (!mature) {
        const double tmean = 0.5 * (weather.tmax[d] + weather.tmin[d]);
        gdd += std::max(0.0, tmean - crop.t_base);
        // ET is throttled by the water fraction at the start of the day;
        // growth sees the bucket after today's rain and ET.
        const double f_w_start = w / crop.w_cap;
        w = std::clamp(w + weather.precip[d] - crop.et_coeff * std::max(0.0, tmean) * f_w_start,
                       0.0, crop.w_cap);
        const double f_w = w / crop.w_cap;
        if (gdd >= crop.gdd_maturity) {
          mature = true;
        } else if (gdd >= crop.gdd_emerge && gdd >= crop.gdd_anthesis) {
          twso += crop.p_so * crop.g_max * temperature_factor(tmean) * f_w;
        }
      }
      y.twso[d] = twso;
    }
  }
  return y;
}

} // namespace secs
