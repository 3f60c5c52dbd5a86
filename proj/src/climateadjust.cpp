#include "secs/climateadjust.hpp"

#include "secs/error.hpp"
#include "secs/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace secs {
namespace {

constexpr const char* kModule = "climateadjust";

double table_at(const Eigen::VectorXd& probs, const Eigen::VectorXd& table, double tau) {
  const Eigen::Index n = probs.size();
  if (n == 1 || tau <= probs[0])
    return table[0];
  if (tau >= probs[n - 1])
    return table[n - 1];
  const double pos = (tau - probs[0]) / (probs[n - 1] - probs[0]) * double(n - 1);
  const auto lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), n - 2);
  const double frac = pos - double(lo);
  return table[lo] + frac * (table[lo + 1] - table[lo]);
}

// Enforces a nondecreasing response along the input order; tied inputs share
// the mean of their values.
void rearrange_monotone(std::span<const double> x, std::vector<double>& y) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  bool monotone = true;
  for (std::size_t k = 1; k < order.size() && monotone; ++k)
    monotone = y[order[k]] >= y[order[k - 1]];
  if (monotone)
    return;
  std::vector<double> values(y.size());
  for (std::size_t k = 0; k < order.size(); ++k)
    values[k] = y[order[k]];
  std::sort(values.begin(), values.end());
  std::size_t k = 0;
  while (k < order.size()) {
    std::size_t end = k + 1;
    while (end < order.size() && x[order[end]] == x[order[k]])
      ++end;
    double mean = 0.0;
    for (std::size_t j = k; j < end; ++j)
      mean += values[j];
    mean /= double(end - k);
    for (std::size_t j = k; j < end; ++j)
      y[order[j]] = end - k == 1 ? values[j] : mean;
    k = end;
  }
}

void adjust_variable(const Eigen::VectorXd& ref, const Eigen::VectorXd& hist,
                     const Eigen::VectorXd& proj, Eigen::VectorXd& out, QdmKind kind,
                     const BiasAdjustSettings& s, bool monthly) {
  out.resize(proj.size());
  const int n_groups = monthly ? 12 : 1;
  for (int g = 1; g <= n_groups; ++g) {
    auto select = [&](const Eigen::VectorXd& v) {
      std::vector<double> sel;
      std::vector<Eigen::Index> idx;
      for (Eigen::Index d = 0; d < v.size(); ++d)
        if (!monthly || month_of(static_cast<int>(d % kDaysPerYear) + 1) == g) {
          sel.push_back(v[d]);
          idx.push_back(d);
        }
      return std::pair{std::move(sel), std::move(idx)};
    };
    const auto [r, ri] = select(ref);
    const auto [h, hi] = select(hist);
    const auto [p, pi] = select(proj);
    const QdmMap map = fit_qdm(r, h, kind, s.n_quantiles, s.trace);
    const std::vector<double> adjusted = apply_qdm(map, p);
    for (std::size_t k = 0; k < pi.size(); ++k)
      out[pi[k]] = adjusted[k];
  }
}

} // namespace

QdmKind parse_qdm_kind(const std::string& name) {
  if (name == "additive")
    return QdmKind::additive;
  if (name == "multiplicative")
    return QdmKind::multiplicative;
  throw ConfigError(kModule, "unknown QDM kind '" + name + "' (additive or multiplicative)");
}

std::string to_string(QdmKind kind) {
  return kind == QdmKind::additive ? "additive" : "multiplicative";
}

void QdmMap::validate() const {
  if (probs.size() == 0 || ref_quantiles.size() != probs.size() ||
      hist_quantiles.size() != probs.size())
    throw ShapeError(kModule, "QDM tables must be nonempty and of equal length");
  if (!(trace > 0))
    throw ConfigError(kModule, "trace must be > 0");
  for (Eigen::Index k = 1; k < probs.size(); ++k)
    if (ref_quantiles[k] < ref_quantiles[k - 1] || hist_quantiles[k] < hist_quantiles[k - 1])
      throw DomainError(kModule, "QDM tables must be nondecreasing");
}

double QdmMap::ref_at(double tau) const { return table_at(probs, ref_quantiles, tau); }
double QdmMap::hist_at(double tau) const { return table_at(probs, hist_quantiles, tau); }

QdmMap fit_qdm(std::span<const double> reference, std::span<const double> historical, QdmKind kind,
               int n_quantiles, double trace) {
  if (n_quantiles < 1)
    throw ConfigError(kModule, "n_quantiles must be >= 1");
  if (!(trace > 0))
    throw ConfigError(kModule, "trace must be > 0");
  const auto n = static_cast<std::size_t>(n_quantiles);
  if (reference.size() < n || historical.size() < n)
    throw SampleSizeError(kModule, "QDM fitting needs at least " + std::to_string(n_quantiles) +
                                       " samples per set (got " + std::to_string(reference.size()) +
                                       " reference, " + std::to_string(historical.size()) +
                                       " historical)");
  const std::vector<double> r = sorted_copy(reference);
  const std::vector<double> h = sorted_copy(historical);
  QdmMap map;
  map.kind = kind;
  map.trace = trace;
  map.probs.resize(n_quantiles);
  map.ref_quantiles.resize(n_quantiles);
  map.hist_quantiles.resize(n_quantiles);
  for (int k = 0; k < n_quantiles; ++k) {
    const double p = double(k + 1) / double(n_quantiles + 1);
    map.probs[k] = p;
    map.ref_quantiles[k] = quantile_sorted(r, p);
    map.hist_quantiles[k] = quantile_sorted(h, p);
  }
  return map;
}

std::vector<double> apply_qdm(const QdmMap& map, std::span<const double> projected) {
  map.validate();
  if (projected.empty())
    throw DomainError(kModule, "projected sample is empty");
  const std::vector<double> sorted = sorted_copy(projected);
  const std::size_t n = sorted.size();
  const double tau_lo = map.probs[0];
  const double tau_hi = map.probs[map.probs.size() - 1];

  std::vector<double> out(projected.size());
  for (std::size_t k = 0; k < projected.size(); ++k) {
    const double x = projected[k];
    double tau = 0.5;
    if (n > 1) {
      // Mid-rank of x among ties, interpolated between order statistics.
      const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x);
      const auto hi = std::upper_bound(sorted.begin(), sorted.end(), x);
      double pos;
      if (lo != hi) {
        pos = 0.5 * double((lo - sorted.begin()) + (hi - sorted.begin()) - 1);
      } else if (lo == sorted.begin()) {
        pos = 0.0;
      } else if (lo == sorted.end()) {
        pos = double(n - 1);
      } else {
        const auto j = static_cast<std::size_t>(lo - sorted.begin());
        pos = double(j - 1) + (x - sorted[j - 1]) / (sorted[j] - sorted[j - 1]);
      }
      tau = pos / double(n - 1);
    }
    tau = std::clamp(tau, tau_lo, tau_hi);
    if (map.kind == QdmKind::additive) {
      out[k] = map.ref_at(tau) + (x - map.hist_at(tau));
    } else {
      out[k] = std::max(0.0, map.ref_at(tau) * x / std::max(map.hist_at(tau), map.trace));
    }
  }
  rearrange_monotone(projected, out);
  return out;
}

void BiasAdjustSettings::validate() const {
  if (n_quantiles < 1)
    throw ConfigError(kModule, "n_quantiles must be >= 1");
  if (!(trace > 0))
    throw ConfigError(kModule, "trace must be > 0");
}

WeatherSeries bias_adjust(const WeatherSeries& reference, const WeatherSeries& historical,
                          const WeatherSeries& projected, const BiasAdjustSettings& settings) {
  settings.validate();
  if (reference.cell.id != historical.cell.id || reference.cell.id != projected.cell.id)
    throw AlignmentError(kModule, "bias adjustment inputs belong to different cells");
  WeatherSeries out = projected;
  adjust_variable(reference.tmax, historical.tmax, projected.tmax, out.tmax, settings.tmax_kind,
                  settings, settings.monthly);
  adjust_variable(reference.tmin, historical.tmin, projected.tmin, out.tmin, settings.tmin_kind,
                  settings, settings.monthly);
  adjust_variable(reference.precip, historical.precip, projected.precip, out.precip,
                  settings.precip_kind, settings, settings.monthly);
  for (Eigen::Index d = 0; d < out.n_days(); ++d) {
    if (out.tmax[d] < out.tmin[d]) {
      const double mid = 0.5 * (out.tmax[d] + out.tmin[d]);
      out.tmax[d] = mid;
      out.tmin[d] = mid;
    }
    out.precip[d] = std::max(0.0, out.precip[d]);
  }
  return out;
}

WeatherSeries splice_year(const WeatherSeries& observed, const WeatherSeries& forecast, int cut_doy) {
  if (observed.cell.id != forecast.cell.id)
    throw AlignmentError(kModule, "cannot splice cell '" + observed.cell.id + "' with '" +
                                      forecast.cell.id + "'");
  if (observed.n_days() != kDaysPerYear || forecast.n_days() != kDaysPerYear)
    throw ShapeError(kModule, "splice_year expects single 365-day years");
  if (observed.start_year != forecast.start_year)
    throw AlignmentError(kModule, "cannot splice different years");
  if (cut_doy < 1 || cut_doy > kDaysPerYear + 1)
    throw ConfigError(kModule, "cut_doy must lie in 1..366");
  WeatherSeries out = forecast;
  const Eigen::Index head = cut_doy - 1;
  out.tmax.head(head) = observed.tmax.head(head);
  out.tmin.head(head) = observed.tmin.head(head);
  out.precip.head(head) = observed.precip.head(head);
  return out;
}

WeatherSeries splice_series(const WeatherSeries& observed, const WeatherSeries& forecast, int cut_doy) {
  if (observed.start_year != forecast.start_year || observed.n_years() != forecast.n_years())
    throw AlignmentError(kModule, "observed and forecast series cover different years for cell '" +
                                      forecast.cell.id + "'");
  WeatherSeries out = forecast;
  for (int y = 0; y < forecast.n_years(); ++y) {
    const WeatherSeries year = splice_year(observed.year(y), forecast.year(y), cut_doy);
    const Eigen::Index off = static_cast<Eigen::Index>(y) * kDaysPerYear;
    out.tmax.segment(off, kDaysPerYear) = year.tmax;
    out.tmin.segment(off, kDaysPerYear) = year.tmin;
    out.precip.segment(off, kDaysPerYear) = year.precip;
  }
  return out;
}

} // namespace secs
