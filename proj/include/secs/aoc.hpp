#ifndef SECS_AOC_HPP
#define SECS_AOC_HPP

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace secs {

/// Percent change of `y` relative to `ref_mean`; DomainError if ref_mean <= 0.
double relative_anomaly(double y, double ref_mean);

struct TercileThresholds {
  double t33 = 0.0;
  double t66 = 0.0;
};

/// 33rd/66th percentiles of the strictly negative anomalies.
/// InsufficientReferenceError when fewer than 3 remain.
TercileThresholds fit_terciles(std::span<const double> reference_anomalies);

enum class Tercile { below, normal, above };

/// above if a > t66, below if a < t33, normal otherwise. Nonnegative
/// anomalies are always above since t66 <= 0.
Tercile classify_anomaly(double anomaly, const TercileThresholds& th);

struct CategoryProbs {
  double p_below = 0.0;
  double p_normal = 0.0;
  double p_above = 0.0;
};

CategoryProbs category_probabilities(std::span<const double> member_anomalies,
                                     const TercileThresholds& th);

enum class AocCategory { inconclusive, above_normal, normal_to_above, normal, below_normal };

std::string to_string(AocCategory c);

struct AocDecision {
  AocCategory category = AocCategory::inconclusive;
  bool is_aoc = false;
};

/// Most probable category. Rules are tried in order:
///   1. p_below == p_above, tied highest  -> inconclusive
///   2. p_above strictly greatest         -> above-normal
///   3. p_above == p_normal, tied highest -> normal-to-above
///   4. p_normal strictly greatest        -> normal
///   5. p_below strictly greatest         -> below-normal
/// and the remaining tie p_below == p_normal > p_above is inconclusive.
/// A tie below the highest probability does not decide anything, so
/// (0.4, 0.3, 0.3) is below-normal and (0, 1, 0) is normal.
/// Equality is judged after rounding to 12 decimals.
AocDecision decide_category(const CategoryProbs& p);

/// True iff the relative anomaly is at most -threshold_pct (inclusive).
bool deterministic_aoc(double mean_yield, double ref_mean, double threshold_pct = 5.0);

/// Full per-cell ensemble protocol: reference mean and terciles from all
/// reference member-years, then member categories for the target period.
struct ProbabilisticAoc {
  double ref_mean = 0.0;
  TercileThresholds thresholds;
  CategoryProbs probs;
  AocDecision decision;
};

ProbabilisticAoc probabilistic_aoc(std::span<const double> reference_yields,
                                   std::span<const double> member_yields);

struct AocWindow {
  int start_year = 0;
  int end_year = 0;
  double mean_yield = 0.0;
  bool is_aoc = false;
};

/// Consecutive non-overlapping windows of `window` years (the last may be
/// shorter), each judged by deterministic_aoc on its mean yield.
std::vector<AocWindow> decadal_aoc(const Eigen::VectorXd& yearly_yield, int start_year,
                                   double ref_mean, int window = 10, double threshold_pct = 5.0);

} // namespace secs

#endif // SECS_AOC_HPP
