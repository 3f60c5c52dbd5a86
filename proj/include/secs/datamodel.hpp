#ifndef SECS_DATAMODEL_HPP
#define SECS_DATAMODEL_HPP

#include "secs/calendar.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace secs {

/// Grid cell identity. Coordinates are NaN when the source (e.g. a yield
/// table) carries none.
struct CellId {
  std::string id;
  double lat = std::numeric_limits<double>::quiet_NaN();
  double lon = std::numeric_limits<double>::quiet_NaN();
};

/// Daily tmax/tmin (degC) and precipitation (mm/day) for one cell, whole
/// no-leap years starting on Jan 1 of `start_year`.
struct WeatherSeries {
  CellId cell;
  int start_year = 0;
  Eigen::VectorXd tmax;
  Eigen::VectorXd tmin;
  Eigen::VectorXd precip;

  Eigen::Index n_days() const { return tmax.size(); }
  int n_years() const { return static_cast<int>(tmax.size() / kDaysPerYear); }
  int end_year() const { return start_year + n_years() - 1; }

  /// Copy of a single year as a one-year series.
  WeatherSeries year(int year_index) const;
};

/// Daily Total Weight of Storage Organs (kg/ha).
struct YieldSeries {
  CellId cell;
  int start_year = 0;
  Eigen::VectorXd twso;

  Eigen::Index n_days() const { return twso.size(); }
  int n_years() const { return static_cast<int>(twso.size() / kDaysPerYear); }
  int end_year() const { return start_year + n_years() - 1; }

  /// TWSO on day 365 of each year.
  Eigen::VectorXd end_of_year() const;
};

struct EnsembleYield {
  int member_id = 0;
  YieldSeries series;
};

/// Throws BoundsError on tmax < tmin, negative or non-finite values, and
/// ShapeError when lengths disagree or are not whole years.
void validate(const WeatherSeries& w);
/// Throws BoundsError on negative TWSO or a within-year decrease.
void validate(const YieldSeries& y);

std::vector<WeatherSeries> read_weather_table(std::istream& in, const std::string& source);
std::vector<WeatherSeries> load_weather_table(const std::filesystem::path& path);
void write_weather_table(std::ostream& out, std::span<const WeatherSeries> series);

/// Model predictions are daily outputs, not accumulations, so readers of
/// prediction files skip the within-year nondecreasing check.
enum class Monotonicity { enforce, relax };

/// Single-member yield table. A `member` column is accepted as long as only
/// member 0 appears.
std::vector<YieldSeries> read_yield_table(std::istream& in, const std::string& source,
    Monotonicity check = Monotonicity::enforce);
std::vector<YieldSeries> load_yield_table(const std::filesystem::path& path,
    Monotonicity check = Monotonicity::enforce);

/// Ensemble yield table, sorted by (cell_id, member).
std::vector<EnsembleYield> read_ensemble_table(std::istream& in, const std::string& source,
    Monotonicity check = Monotonicity::enforce);
std::vector<EnsembleYield> load_ensemble_table(const std::filesystem::path& path,
    Monotonicity check = Monotonicity::enforce);

void write_yield_table(std::ostream& out, std::span<const YieldSeries> series);
void write_ensemble_table(std::ostream& out, std::span<const EnsembleYield> members);

struct YearRangeMismatch {
  std::string cell_id;
  int weather_start = 0, weather_end = 0;
  int yield_start = 0, yield_end = 0;
};

struct AlignmentReport {
  std::vector<std::string> in_both;
  std::vector<std::string> weather_only;
  std::vector<std::string> yield_only;
  std::vector<YearRangeMismatch> year_mismatches;
  bool aligned = false;

  std::string summary() const;
};

AlignmentReport validate_alignment(std::span<const WeatherSeries> weather,
                                   std::span<const YieldSeries> yields);

} // namespace secs

#endif // SECS_DATAMODEL_HPP
