#ifndef SECS_SYNTHDATA_HPP
#define SECS_SYNTHDATA_HPP

#include "secs/datamodel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace secs {

/// Stochastic daily weather generator settings. Temperatures follow a
/// sinusoidal annual cycle plus AR(1) noise, shifted by `lat_gradient` per
/// cell index; precipitation comes from a two-state occurrence chain with
/// gamma-distributed wet-day amounts.
struct WeatherGenConfig {
  int n_cells = 200;
  int n_years = 8;
  std::uint64_t seed = 42;
  int start_year = 1993;
  double mean_annual_t = 12.0;      ///< degC
  double seasonal_amplitude = 10.0; ///< degC
  double t_noise_sd = 2.5;          ///< stationary sd of the AR(1) noise, degC
  double ar1_coeff = 0.7;
  double wet_day_prob = 0.35; ///< long-run fraction of wet days
  double wetwet_prob = 0.6;   ///< P(wet | previous day wet)
  double rain_shape = 0.8;
  double rain_scale = 9.0;    ///< mm
  double lat_gradient = 0.03; ///< degC cooler per cell index
  double diurnal_range = 10.0; ///< tmax - tmin, degC

  void validate() const;
};

struct ScenarioDelta {
  double warming = 0.0;
  double precip_factor = 1.0;

  void validate() const;
};

/// Parameters of the toy water-limited crop simulator.
struct CropParams {
  std::string name;
  int sow_doy = 110;
  double t_base = 8.0;
  double t_opt = 26.0;
  double t_max = 38.0;
  double gdd_emerge = 100.0;
  double gdd_anthesis = 750.0;
  double gdd_maturity = 1400.0;
  double g_max = 220.0; ///< kg/ha/day
  double p_so = 0.6;
  double w_cap = 150.0; ///< mm
  double w_init_frac = 0.6;
  double et_coeff = 0.2; ///< mm / degC / day

  void validate() const;
};

/// `maizelike` or `barleylike`; ConfigError otherwise.
CropParams crop_preset(const std::string& name);

std::vector<WeatherSeries> generate_weather(const WeatherGenConfig& config);

WeatherSeries apply_scenario(const WeatherSeries& weather, const ScenarioDelta& delta);

/// Deterministic daily degree-day and single-bucket water balance simulation.
/// Each calendar year is simulated independently from `sow_doy`.
YieldSeries simulate_crop(const WeatherSeries& weather, const CropParams& crop);

} // namespace secs

#endif // SECS_SYNTHDATA_HPP
