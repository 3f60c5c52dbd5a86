#ifndef SECS_TESTS_SUPPORT_HPP
#define SECS_TESTS_SUPPORT_HPP

#include "secs/datamodel.hpp"
#include "secs/synthdata.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace secs::testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("secs_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline WeatherSeries constant_weather(const std::string& id, int start_year, int n_years,
                                      double tmax, double tmin, double precip) {
  WeatherSeries w;
  w.cell = CellId{id, 45.0, 5.0};
  w.start_year = start_year;
  const Eigen::Index n = Eigen::Index(n_years) * kDaysPerYear;
  w.tmax = Eigen::VectorXd::Constant(n, tmax);
  w.tmin = Eigen::VectorXd::Constant(n, tmin);
  w.precip = Eigen::VectorXd::Constant(n, precip);
  return w;
}

/// Crop parameters drawn across a wide but valid range.
inline CropParams random_crop(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CropParams c = crop_preset(u(gen) < 0.5 ? "maizelike" : "barleylike");
  c.sow_doy = 30 + int(u(gen) * 150);
  c.t_base = -2.0 + 10.0 * u(gen);
  c.t_opt = c.t_base + 8.0 + 15.0 * u(gen);
  c.t_max = c.t_opt + 4.0 + 12.0 * u(gen);
  c.gdd_emerge = 20.0 + 150.0 * u(gen);
  c.gdd_anthesis = c.gdd_emerge + 100.0 + 800.0 * u(gen);
  c.gdd_maturity = c.gdd_anthesis + 100.0 + 900.0 * u(gen);
  c.g_max = 50.0 + 300.0 * u(gen);
  c.p_so = 0.1 + 0.9 * u(gen);
  c.w_cap = 50.0 + 200.0 * u(gen);
  c.w_init_frac = u(gen);
  c.et_coeff = 0.05 + 0.35 * u(gen);
  return c;
}

inline WeatherGenConfig random_weather_config(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  WeatherGenConfig w;
  w.n_cells = 1;
  w.n_years = 1;
  w.seed = gen();
  w.mean_annual_t = 2.0 + 18.0 * u(gen);
  w.seasonal_amplitude = 2.0 + 14.0 * u(gen);
  w.t_noise_sd = 4.0 * u(gen);
  w.wet_day_prob = 0.9 * u(gen);
  w.wetwet_prob = u(gen);
  w.rain_scale = 1.0 + 15.0 * u(gen);
  return w;
}

} // namespace secs::testing

#endif // SECS_TESTS_SUPPORT_HPP
