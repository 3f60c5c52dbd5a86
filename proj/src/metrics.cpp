#include "secs/metrics.hpp"

#include "secs/error.hpp"
#include "secs/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace secs {
namespace {

constexpr const char* kModule = "metrics";

void check_curve(const Curve& c) {
  if (c.rows() == 0)
    throw DomainError(kModule, "curve must contain at least one point");
  if (!c.allFinite())
    throw DomainError(kModule, "curve coordinates must be finite");
}

double point_distance(const Curve& p, Eigen::Index i, const Curve& q, Eigen::Index j) {
  return std::hypot(p(i, 0) - q(j, 0), p(i, 1) - q(j, 1));
}

double directed_hausdorff(const Curve& from, const Curve& to) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < to.rows() && nearest > worst; ++j)
      nearest = std::min(nearest, point_distance(from, i, to, j));
    worst = std::max(worst, nearest);
  }
  return worst;
}

double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index k = 1; k < x.size(); ++k)
    s += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return s;
}

double sample_sd(std::span<const double> s) {
  double mean = 0.0;
  for (double v : s)
    mean += v;
  mean /= double(s.size());
  double ss = 0.0;
  for (double v : s)
    ss += (v - mean) * (v - mean);
  return std::sqrt(ss / double(s.size() - 1));
}

void check_samples(std::span<const double> samples) {
  if (samples.size() < 2)
    throw DomainError(kModule, "density estimation needs at least 2 samples");
  for (double v : samples)
    if (!std::isfinite(v))
      throw DomainError(kModule, "density samples must be finite");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi)
    throw DomainError(kModule, "degenerate spread: all density samples are equal");
}

} // namespace

double discrete_frechet(const Curve& p, const Curve& q) {
  check_curve(p);
  check_curve(q);
  const Eigen::Index m = p.rows(), n = q.rows();
  std::vector<double> prev(static_cast<std::size_t>(n)), cur(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = point_distance(p, i, q, j);
      double reach;
      if (i == 0 && j == 0)
        reach = d;
      else if (i == 0)
        reach = cur[j - 1];
      else if (j == 0)
        reach = prev[0];
      else
        reach = std::min({prev[j], cur[j - 1], prev[j - 1]});
      cur[j] = std::max(d, reach);
    }
    std::swap(prev, cur);
  }
  return prev[static_cast<std::size_t>(n - 1)];
}

double hausdorff(const Curve& p, const Curve& q) {
  check_curve(p);
  check_curve(q);
  return std::max(directed_hausdorff(p, q), directed_hausdorff(q, p));
}

std::pair<Curve, Curve> normalize_curves(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() == 0)
    throw ShapeError(kModule, "curves to normalize must have equal, nonzero length");
  const double scale = std::max({a.maxCoeff(), b.maxCoeff(), 1.0});
  const Eigen::Index n = a.size();
  Curve ca(n, 2), cb(n, 2);
  for (Eigen::Index d = 0; d < n; ++d) {
    const double x = double(d + 1) / 365.0;
    ca(d, 0) = x;
    cb(d, 0) = x;
  }
  ca.col(1) = a / scale;
  cb.col(1) = b / scale;
  return {std::move(ca), std::move(cb)};
}

ErrorStats error_stats(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw ShapeError(kModule, "error_stats inputs differ in length");
  if (a.size() == 0)
    throw ShapeError(kModule, "error_stats needs at least one value");
  const Eigen::ArrayXd diff = (a - b).array();
  return {diff.abs().mean(), diff.mean()};
}

double ndi(double a, double b) {
  if (!(a >= 0) || !(b >= 0))
    throw DomainError(kModule, "NDI inputs must be nonnegative");
  if (a == 0 && b == 0)
    return 0.0;
  return (a - b) / (a + b);
}

ErrorField ndi_field(const ErrorField& a, const ErrorField& b) {
  ErrorField out;
  for (const auto& [cell, va] : a) {
    auto it = b.find(cell);
    if (it != b.end())
      out.emplace(cell, ndi(va, it->second));
  }
  return out;
}

double DensityCurve::integral() const { return trapezoid(grid, density); }

double silverman_bandwidth(std::span<const double> samples) {
  check_samples(samples);
  return 1.06 * sample_sd(samples) * std::pow(double(samples.size()), -0.2);
}

Eigen::VectorXd density_grid(std::span<const double> a, std::span<const double> b, int n_grid) {
  if (n_grid < 2)
    throw DomainError(kModule, "density grid needs at least 2 points");
  const double h = std::max(silverman_bandwidth(a), b.empty() ? 0.0 : silverman_bandwidth(b));
  double lo = *std::min_element(a.begin(), a.end());
  double hi = *std::max_element(a.begin(), a.end());
  if (!b.empty()) {
    lo = std::min(lo, *std::min_element(b.begin(), b.end()));
    hi = std::max(hi, *std::max_element(b.begin(), b.end()));
  }
  return Eigen::VectorXd::LinSpaced(n_grid, lo - 3 * h, hi + 3 * h);
}

DensityCurve kde_density(std::span<const double> samples, int n_grid) {
  return kde_density(samples, density_grid(samples, {}, n_grid));
}

DensityCurve kde_density(std::span<const double> samples, const Eigen::VectorXd& grid) {
  const double h = silverman_bandwidth(samples);
  if (grid.size() < 2)
    throw DomainError(kModule, "density grid needs at least 2 points");
  DensityCurve out;
  out.grid = grid;
  out.density = Eigen::VectorXd::Zero(grid.size());
  const double norm = 1.0 / (double(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    double s = 0.0;
    for (double v : samples) {
      const double z = (grid[k] - v) / h;
      s += std::exp(-0.5 * z * z);
    }
    out.density[k] = s * norm;
  }
  // Mass of the kernels beyond the grid ends is folded back in.
  const double mass = out.integral();
  if (mass > 0)
    out.density /= mass;
  return out;
}

double overlap(const DensityCurve& f, const DensityCurve& g) {
  if (f.grid.size() != g.grid.size() || f.grid != g.grid)
    throw ShapeError(kModule, "overlap needs both densities on the same grid");
  return trapezoid(f.grid, f.density.cwiseMin(g.density));
}

} // namespace secs
