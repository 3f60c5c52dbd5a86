#include "secs/aoc.hpp"

#include "secs/error.hpp"
#include "secs/stats.hpp"

#include <algorithm>
#include <cmath>

namespace secs {
namespace {

constexpr const char* kModule = "aoc";

double round12(double v) { return std::round(v * 1e12) / 1e12; }

} // namespace

double relative_anomaly(double y, double ref_mean) {
  if (!(ref_mean > 0))
    throw DomainError(kModule, "reference mean must be > 0");
  return 100.0 * (y - ref_mean) / ref_mean;
}

TercileThresholds fit_terciles(std::span<const double> reference_anomalies) {
  std::vector<double> negatives;
  for (double a : reference_anomalies)
    if (a < 0)
      negatives.push_back(a);
  if (negatives.size() < 3)
    throw InsufficientReferenceError(kModule, "need at least 3 negative reference anomalies, found " +
                                                  std::to_string(negatives.size()));
  std::sort(negatives.begin(), negatives.end());
  return {quantile_sorted(negatives, 0.33), quantile_sorted(negatives, 0.66)};
}

Tercile classify_anomaly(double anomaly, const TercileThresholds& th) {
  if (anomaly > th.t66)
    return Tercile::above;
  if (anomaly < th.t33)
    return Tercile::below;
  return Tercile::normal;
}

CategoryProbs category_probabilities(std::span<const double> member_anomalies,
                                     const TercileThresholds& th) {
  if (member_anomalies.empty())
    throw DomainError(kModule, "ensemble has no members");
  long below = 0, normal = 0, above = 0;
  for (double a : member_anomalies) {
    switch (classify_anomaly(a, th)) {
    case Tercile::below: ++below; break;
    case Tercile::normal: ++normal; break;
    case Tercile::above: ++above; break;
    }
  }
  const double n = double(below + normal + above);
  return {double(below) / n, double(normal) / n, double(above) / n};
}

std::string to_string(AocCategory c) {
  switch (c) {
  case AocCategory::inconclusive: return "inconclusive";
  case AocCategory::above_normal: return "above-normal";
  case AocCategory::normal_to_above: return "normal-to-above";
  case AocCategory::normal: return "normal";
  case AocCategory::below_normal: return "below-normal";
  }
  return "inconclusive";
}

AocDecision decide_category(const CategoryProbs& p) {
  const double b = round12(p.p_below);
  const double n = round12(p.p_normal);
  const double a = round12(p.p_above);
  const double top = std::max({b, n, a});
  AocCategory c = AocCategory::inconclusive;
  if (b == a && b == top)
    c = AocCategory::inconclusive;
  else if (a > n && a > b)
    c = AocCategory::above_normal;
  else if (a == n && a == top)
    c = AocCategory::normal_to_above;
  else if (n > a && n > b)
    c = AocCategory::normal;
  else if (b > n && b > a)
    c = AocCategory::below_normal;
  return {c, c == AocCategory::below_normal};
}

bool deterministic_aoc(double mean_yield, double ref_mean, double threshold_pct) {
  // Tolerance keeps the inclusive boundary robust to rounding in y / ref.
  return relative_anomaly(mean_yield, ref_mean) <= -threshold_pct + 1e-9;
}

ProbabilisticAoc probabilistic_aoc(std::span<const double> reference_yields,
                                   std::span<const double> member_yields) {
  if (reference_yields.empty())
    throw InsufficientReferenceError(kModule, "empty reference period");
  ProbabilisticAoc r;
  double sum = 0.0;
  for (double y : reference_yields)
    sum += y;
  r.ref_mean = sum / double(reference_yields.size());
  std::vector<double> ref_anomalies;
  for (double y : reference_yields)
    ref_anomalies.push_back(relative_anomaly(y, r.ref_mean));
  r.thresholds = fit_terciles(ref_anomalies);
  std::vector<double> member_anomalies;
  for (double y : member_yields)
    member_anomalies.push_back(relative_anomaly(y, r.ref_mean));
  r.probs = category_probabilities(member_anomalies, r.thresholds);
  r.decision = decide_category(r.probs);
  return r;
}

std::vector<AocWindow> decadal_aoc(const Eigen::VectorXd& yearly_yield, int start_year,
                                   double ref_mean, int window, double threshold_pct) {
  if (yearly_yield.size() == 0)
    throw DomainError(kModule, "no years to aggregate");
  if (window < 1)
    throw ConfigError(kModule, "window must be >= 1 year");
  std::vector<AocWindow> out;
  for (Eigen::Index start = 0; start < yearly_yield.size(); start += window) {
    const Eigen::Index len = std::min<Eigen::Index>(window, yearly_yield.size() - start);
    AocWindow w;
    w.start_year = start_year + static_cast<int>(start);
    w.end_year = w.start_year + static_cast<int>(len) - 1;
    w.mean_yield = yearly_yield.segment(start, len).mean();
    w.is_aoc = deterministic_aoc(w.mean_yield, ref_mean, threshold_pct);
    out.push_back(w);
  }
  return out;
}

} // namespace secs
