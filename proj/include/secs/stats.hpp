#ifndef SECS_STATS_HPP
#define SECS_STATS_HPP

#include <span>
#include <vector>

namespace secs {

/// Linear interpolation between order statistics at position p * (n - 1).
/// `sorted` must be nonempty and ascending.
double quantile_sorted(std::span<const double> sorted, double p);

std::vector<double> sorted_copy(std::span<const double> values);

} // namespace secs

#endif // SECS_STATS_HPP
