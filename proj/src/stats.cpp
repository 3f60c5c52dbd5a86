#include "secs/stats.hpp"

#include "secs/error.hpp"

#include <algorithm>
#include <cmath>

namespace secs {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty())
    throw DomainError("stats", "quantile of an empty sample");
  const double pos = p * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size())
    return sorted.back();
  const double frac = pos - double(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> sorted_copy(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return v;
}

} // namespace secs
