#ifndef SECS_CLIMATEADJUST_HPP
#define SECS_CLIMATEADJUST_HPP

#include "secs/datamodel.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace secs {

enum class QdmKind { additive, multiplicative };

QdmKind parse_qdm_kind(const std::string& name);
std::string to_string(QdmKind kind);

/// Empirical quantile tables of the reference and historical samples on a
/// shared probability grid p_k = k / (n + 1), k = 1..n (1%..99% for n = 99).
struct QdmMap {
  Eigen::VectorXd probs;
  Eigen::VectorXd ref_quantiles;
  Eigen::VectorXd hist_quantiles;
  QdmKind kind = QdmKind::additive;
  double trace = 0.05; ///< floor on multiplicative denominators

  void validate() const;
  /// Reference / historical quantile at probability tau (linear in tau).
  double ref_at(double tau) const;
  double hist_at(double tau) const;
};

QdmMap fit_qdm(std::span<const double> reference, std::span<const double> historical, QdmKind kind,
               int n_quantiles = 99, double trace = 0.05);

/// Quantile delta mapping of a projected sample. Each value's non-exceedance
/// probability within the projected sample (interpolated, clamped to the
/// table range) selects the reference/historical quantiles; additive maps
/// add the projected anomaly, multiplicative maps scale by the projected
/// ratio. The output keeps the rank order of the input.
std::vector<double> apply_qdm(const QdmMap& map, std::span<const double> projected);

struct BiasAdjustSettings {
  QdmKind tmax_kind = QdmKind::additive;
  QdmKind tmin_kind = QdmKind::additive;
  QdmKind precip_kind = QdmKind::multiplicative;
  int n_quantiles = 99;
  double trace = 0.05;
  bool monthly = false; ///< fit one map per calendar month

  void validate() const;
};

/// Per-variable QDM of `projected` against `historical` -> `reference` of the
/// same cell. Days where adjusted tmax < tmin are set to their midpoint.
WeatherSeries bias_adjust(const WeatherSeries& reference, const WeatherSeries& historical,
                          const WeatherSeries& projected, const BiasAdjustSettings& settings);

/// Observed days 1..cut_doy-1 followed by forecast days cut_doy..365 of one
/// year. Throws AlignmentError for different cells or years.
WeatherSeries splice_year(const WeatherSeries& observed, const WeatherSeries& forecast,
                          int cut_doy = 152);

/// splice_year applied to every year of two aligned multi-year series.
WeatherSeries splice_series(const WeatherSeries& observed, const WeatherSeries& forecast,
                            int cut_doy = 152);

} // namespace secs

#endif // SECS_CLIMATEADJUST_HPP
