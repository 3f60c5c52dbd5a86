#include "secs/error.hpp"
#include "secs/synthdata.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace secs;

namespace {

double seasonal(const WeatherGenConfig& cfg, int cell, int day) {
  const int doy = day % kDaysPerYear + 1;
  return cfg.mean_annual_t - cfg.lat_gradient * cell +
         cfg.seasonal_amplitude * std::sin(2.0 * std::numbers::pi * (doy - 105) / 365.0);
}

} // namespace

TEST_CASE("noise-free dry configuration is exactly sinusoidal") {
  WeatherGenConfig cfg;
  cfg.n_cells = 3;
  cfg.n_years = 2;
  cfg.t_noise_sd = 0.0;
  cfg.wet_day_prob = 0.0;
  const auto w = generate_weather(cfg);
  REQUIRE(w.size() == 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(w[c].precip.isZero());
    const Eigen::VectorXd range = w[c].tmax - w[c].tmin;
    CHECK((range.array() - cfg.diurnal_range).abs().maxCoeff() < 1e-12);
    for (int d = 0; d < w[c].n_days(); ++d)
      CHECK(0.5 * (w[c].tmax[d] + w[c].tmin[d]) == doctest::Approx(seasonal(cfg, c, d)).epsilon(1e-12));
  }
}

TEST_CASE("generation is deterministic and independent of the cell count") {
  WeatherGenConfig cfg;
  cfg.n_cells = 6;
  cfg.n_years = 2;
  const auto a = generate_weather(cfg);
  const auto b = generate_weather(cfg);
  cfg.n_cells = 3;
  const auto c = generate_weather(cfg);
  for (int i = 0; i < 6; ++i) {
    CHECK(a[i].tmax == b[i].tmax);
    CHECK(a[i].precip == b[i].precip);
  }
  for (int i = 0; i < 3; ++i) {
    CHECK(a[i].cell.id == c[i].cell.id);
    CHECK(a[i].tmax == c[i].tmax);
    CHECK(a[i].precip == c[i].precip);
  }
  cfg.seed = 43;
  CHECK(generate_weather(cfg)[0].tmax != c[0].tmax);
}

TEST_CASE("always-wet gamma amounts have the gamma mean") {
  WeatherGenConfig cfg;
  cfg.n_cells = 1;
  cfg.n_years = 274; // 100010 days
  cfg.wet_day_prob = 1.0;
  cfg.rain_shape = 2.0;
  cfg.rain_scale = 3.0;
  const auto w = generate_weather(cfg);
  CHECK((w[0].precip.array() > 0).all());
  CHECK(std::abs(w[0].precip.mean() - 6.0) < 0.05 * 6.0);
}

TEST_CASE("occurrence chain reproduces its wet fraction and persistence") {
  WeatherGenConfig cfg;
  cfg.n_cells = 1;
  cfg.n_years = 274;
  const auto w = generate_weather(cfg);
  const auto& p = w[0].precip;
  double wet = 0, wet_pairs = 0, wet_prev = 0;
  for (Eigen::Index d = 0; d < p.size(); ++d) {
    wet += p[d] > 0;
    if (d > 0 && p[d - 1] > 0) {
      ++wet_prev;
      wet_pairs += p[d] > 0;
    }
  }
  CHECK(std::abs(wet / double(p.size()) - cfg.wet_day_prob) < 0.02);
  CHECK(std::abs(wet_pairs / wet_prev - cfg.wetwet_prob) < 0.02);
}

TEST_CASE("temperature noise has the configured lag-1 autocorrelation") {
  for (double ar1 : {0.0, 0.5, 0.7, 0.9}) {
    WeatherGenConfig cfg;
    cfg.n_cells = 1;
    cfg.n_years = 40; // 14600 days
    cfg.ar1_coeff = ar1;
    cfg.seed = 7;
    const auto w = generate_weather(cfg);
    Eigen::VectorXd noise(w[0].n_days());
    for (int d = 0; d < noise.size(); ++d)
      noise[d] = 0.5 * (w[0].tmax[d] + w[0].tmin[d]) - seasonal(cfg, 0, d);
    const Eigen::VectorXd z = noise.array() - noise.mean();
    const double r = z.head(z.size() - 1).dot(z.tail(z.size() - 1)) / z.squaredNorm();
    CHECK(std::abs(r - ar1) < 0.05);
    CHECK(std::abs(std::sqrt(z.squaredNorm() / double(z.size())) - cfg.t_noise_sd) < 0.25);
  }
}

TEST_CASE("invalid weather configurations are rejected") {
  WeatherGenConfig cfg;
  cfg.wet_day_prob = 1.5;
  CHECK_THROWS_AS(generate_weather(cfg), ConfigError);
  cfg = {};
  cfg.rain_shape = 0.0;
  CHECK_THROWS_AS(generate_weather(cfg), ConfigError);
  cfg = {};
  cfg.t_noise_sd = -1.0;
  CHECK_THROWS_AS(generate_weather(cfg), ConfigError);
  cfg = {};
  cfg.ar1_coeff = 1.0;
  CHECK_THROWS_AS(generate_weather(cfg), ConfigError);
}

TEST_CASE("scenario deltas") {
  WeatherGenConfig cfg;
  cfg.n_cells = 1;
  cfg.n_years = 1;
  const auto w = generate_weather(cfg)[0];
  const auto same = apply_scenario(w, ScenarioDelta{});
  CHECK(same.tmax == w.tmax);
  CHECK(same.precip == w.precip);
  const auto warm = apply_scenario(w, ScenarioDelta{2.0, 1.0});
  CHECK(warm.tmax == (w.tmax.array() + 2.0).matrix());
  CHECK(warm.tmin == (w.tmin.array() + 2.0).matrix());
  const auto dry = apply_scenario(w, ScenarioDelta{0.0, 0.5});
  CHECK(dry.precip == 0.5 * w.precip);
  CHECK_THROWS_AS(apply_scenario(w, ScenarioDelta{0.0, 0.0}), ConfigError);
}

TEST_CASE("crop presets") {
  CHECK(crop_preset("maizelike").sow_doy == 110);
  CHECK(crop_preset("barleylike").sow_doy == 70);
  CHECK_THROWS_AS(crop_preset("rice"), ConfigError);
  CropParams bad = crop_preset("maizelike");
  bad.gdd_anthesis = bad.gdd_maturity;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cold year gives zero yield") {
  const auto crop = crop_preset("maizelike");
  const auto w = testing::constant_weather("a", 2000, 2, crop.t_base - 1.0, crop.t_base - 5.0, 5.0);
  CHECK(simulate_crop(w, crop).twso.isZero());
}

TEST_CASE("dry year with an empty bucket gives zero yield") {
  auto crop = crop_preset("maizelike");
  crop.w_init_frac = 0.0;
  const auto w = testing::constant_weather("a", 2000, 1, 30.0, 20.0, 0.0);
  CHECK(simulate_crop(w, crop).twso.isZero());
}

TEST_CASE("constant optimal temperature with ample rain matches the closed form") {
  for (const char* name : {"maizelike", "barleylike"}) {
    const auto crop = crop_preset(name);
    const double t = crop.t_opt;
    const auto w = testing::constant_weather("a", 2000, 1, t + 3.0, t - 3.0, 50.0);
    const auto y = simulate_crop(w, crop);
    // Day k after sowing (k = 1, 2, ...) ends with GDD = k * r.
    const double r = crop.t_opt - crop.t_base;
    const int season = kDaysPerYear - crop.sow_doy + 1;
    int growing_days = 0;
    for (int k = 1; k <= season; ++k)
      if (k * r >= crop.gdd_anthesis && k * r < crop.gdd_maturity)
        ++growing_days;
    CHECK(growing_days > 0);
    CHECK(y.twso[364] == doctest::Approx(crop.p_so * crop.g_max * growing_days).epsilon(1e-12));
    const int first_growth = int(std::ceil(crop.gdd_anthesis / r));
    CHECK(y.twso[crop.sow_doy - 1 + first_growth - 2] == 0.0);
    CHECK(y.twso[crop.sow_doy - 1 + first_growth - 1] > 0.0);
  }
}

TEST_CASE("simulated yield invariants over random parameterizations") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto crop = testing::random_crop(gen);
    const auto w = generate_weather(testing::random_weather_config(gen))[0];
    const auto y = simulate_crop(w, crop);
    CHECK_NOTHROW(validate(y));
    const std::string violation = oracle::crop_invariant_violation(w, crop, y);
    REQUIRE_MESSAGE(violation.empty(), violation);

    // Drier weather never raises the final yield.
    const double k = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    const auto drier = simulate_crop(apply_scenario(w, ScenarioDelta{0.0, std::max(k, 1e-3)}), crop);
    REQUIRE(drier.twso[364] <= y.twso[364] + 1e-9);
  }
}
