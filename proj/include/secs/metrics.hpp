#ifndef SECS_METRICS_HPP
#define SECS_METRICS_HPP

#include <Eigen/Core>

#include <map>
#include <span>
#include <string>
#include <utility>

namespace secs {

/// Ordered 2-D polyline samples, one point per row.
using Curve = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Discrete Frechet distance (Eiter & Mannila coupling recursion) under the
/// Euclidean point metric. Throws DomainError on an empty curve.
double discrete_frechet(const Curve& p, const Curve& q);

/// Symmetric Hausdorff distance between the point sets of two curves.
double hausdorff(const Curve& p, const Curve& q);

/// Maps two equal-length daily series onto (day/365, value/Y) with Y the
/// larger of the two maxima (at least 1).
std::pair<Curve, Curve> normalize_curves(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct ErrorStats {
  double mae = 0.0;
  double mean_bias = 0.0; ///< mean(a - b)
};

ErrorStats error_stats(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// (a - b) / (a + b), 0 when both are 0. Inputs must be nonnegative.
double ndi(double a, double b);

/// Per-cell scalar keyed by cell id.
using ErrorField = std::map<std::string, double>;

/// NDI of matching cells; cells missing from either side are skipped.
ErrorField ndi_field(const ErrorField& a, const ErrorField& b);

struct DensityCurve {
  Eigen::VectorXd grid;
  Eigen::VectorXd density;

  double integral() const;
};

/// Silverman's rule of thumb, 1.06 * sd * n^(-1/5).
double silverman_bandwidth(std::span<const double> samples);

/// Evenly spaced grid spanning [min - 3h, max + 3h] of the union of the
/// given sample sets, h being the largest of their bandwidths.
Eigen::VectorXd density_grid(std::span<const double> a, std::span<const double> b, int n_grid);

/// Gaussian kernel density estimate on its own grid [min - 3h, max + 3h],
/// normalized to unit trapezoidal mass over that grid.
DensityCurve kde_density(std::span<const double> samples, int n_grid);
DensityCurve kde_density(std::span<const double> samples, const Eigen::VectorXd& grid);

/// Trapezoidal integral of min(f, g); both curves must share one grid.
double overlap(const DensityCurve& f, const DensityCurve& g);

} // namespace secs

#endif // SECS_METRICS_HPP
