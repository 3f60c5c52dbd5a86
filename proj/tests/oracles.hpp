#ifndef SECS_TESTS_ORACLES_HPP
#define SECS_TESTS_ORACLES_HPP

// Independent reference implementations used by unit tests and the
// acceptance binary.

#include "secs/aoc.hpp"
#include "secs/metrics.hpp"
#include "secs/nested_model.hpp"
#include "secs/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace secs::oracle {

// ------------------------------------------------------------ gradients

struct GradCheckReport {
  int configs = 0;
  int rejected = 0;       ///< draws discarded for sitting near a ReLU kink
  long long entries = 0;  ///< parameter entries compared
  double worst_rel = 0.0; ///< largest |a - n| / max(|a|, |n|) over entries above abs_tol
  long long failures = 0;
};

struct TinyCase {
  NestedModel<double> model;
  std::vector<BatchedSequence<double>> inputs;
  MatrixX<double> weights; ///< loss = sum(weights .* predictions)
  std::uint64_t dropout_seed = 0;
};

inline void fill(MatrixX<double>& m, std::mt19937_64& gen, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = u(gen);
}

/// hidden 4, F = 5, batch_len 3, two batches (4 to 6 valid days), 1 to 3
/// samples, dropout on or off.
inline TinyCase draw_tiny_case(std::mt19937_64& gen) {
  const int H = 4, F = 5, L = 3;
  TinyCase tc;
  auto& p = tc.model.params;
  p.inner = LstmParams<double>::zeros(F, H);
  p.outer = LstmParams<double>::zeros(H, H);
  p.head_W.resize(L, H);
  p.head_b.resize(L, 1);
  fill(p.inner.W, gen, 0.8);
  fill(p.inner.U, gen, 0.8);
  fill(p.inner.b, gen, 0.5);
  fill(p.outer.W, gen, 0.8);
  fill(p.outer.U, gen, 0.8);
  fill(p.outer.b, gen, 0.5);
  fill(p.head_W, gen, 1.0);
  fill(p.head_b, gen, 0.5);
  tc.model.dropout_rate = (gen() % 2 == 0) ? 0.0 : 0.3;
  tc.model.spec.batch_len = L;
  const int n_days = 4 + int(gen() % 3);
  const int S = 1 + int(gen() % 3);
  for (int s = 0; s < S; ++s) {
    Eigen::MatrixXd x(n_days, F);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      x.data()[i] = std::normal_distribution<double>(0.0, 1.0)(gen);
    tc.inputs.push_back(batch_sequence<double>(x, L));
  }
  tc.weights.resize(n_days, S);
  fill(tc.weights, gen, 1.0);
  tc.dropout_seed = gen();
  return tc;
}

inline ForwardResult<double> run_forward(const TinyCase& tc, const NestedModel<double>& model) {
  std::mt19937_64 rng(tc.dropout_seed);
  return forward(model, std::span<const BatchedSequence<double>>(tc.inputs), Mode::train, &rng);
}

inline double min_abs_preactivation(const ForwardResult<double>& r) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& pre : r.cache->head_pre)
    m = std::min(m, pre.cwiseAbs().minCoeff());
  return m;
}

/// Analytic backward against central differences for `n_configs` random
/// tiny models. An entry fails when |a - n| > rel_tol * max(|a|, |n|) + abs_tol.
inline GradCheckReport gradient_check(int n_configs, std::uint64_t seed, double eps = 1e-4,
                                      double rel_tol = 1e-4, double abs_tol = 1e-8) {
  std::mt19937_64 gen(seed);
  GradCheckReport report;
  while (report.configs < n_configs) {
    TinyCase tc = draw_tiny_case(gen);
    const auto base = run_forward(tc, tc.model);
    // Keep every head pre-activation well away from the ReLU kink so the
    // finite difference never straddles it.
    if (min_abs_preactivation(base) < 1e-2) {
      ++report.rejected;
      continue;
    }
    ++report.configs;
    const auto grad = backward(tc.model, base.cache, tc.weights);
    NestedModel<double> probe = tc.model;
    auto probe_tensors = probe.params.tensors();
    const auto grad_tensors = grad.tensors();
    for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
      MatrixX<double>& t = *probe_tensors[k];
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double keep = t.data()[i];
        t.data()[i] = keep + eps;
        const double up = (run_forward(tc, probe).predictions.array() * tc.weights.array()).sum();
        t.data()[i] = keep - eps;
        const double down = (run_forward(tc, probe).predictions.array() * tc.weights.array()).sum();
        t.data()[i] = keep;
        const double numeric = (up - down) / (2.0 * eps);
        const double analytic = grad_tensors[k]->data()[i];
        const double diff = std::abs(analytic - numeric);
        const double scale = std::max(std::abs(analytic), std::abs(numeric));
        ++report.entries;
        if (scale > abs_tol)
          report.worst_rel = std::max(report.worst_rel, diff / scale);
        if (diff > rel_tol * scale + abs_tol)
          ++report.failures;
      }
    }
  }
  return report;
}

// -------------------------------------------------------------- curves

/// Minimum over every monotone coupling of the largest paired distance,
/// by explicit enumeration of lattice paths from (0,0) to (m-1,n-1).
inline double brute_force_frechet(const Curve& p, const Curve& q) {
  const Eigen::Index m = p.rows(), n = q.rows();
  double best = std::numeric_limits<double>::infinity();
  std::function<void(Eigen::Index, Eigen::Index, double)> walk = [&](Eigen::Index i, Eigen::Index j,
                                                                     double worst) {
    worst = std::max(worst, (p.row(i) - q.row(j)).norm());
    if (worst >= best)
      return;
    if (i == m - 1 && j == n - 1) {
      best = worst;
      return;
    }
    if (i + 1 < m)
      walk(i + 1, j, worst);
    if (j + 1 < n)
      walk(i, j + 1, worst);
    if (i + 1 < m && j + 1 < n)
      walk(i + 1, j + 1, worst);
  };
  walk(0, 0, 0.0);
  return best;
}

/// Same quantity without pruning, so that pruning cannot hide a bug.
inline double exhaustive_frechet(const Curve& p, const Curve& q) {
  const Eigen::Index m = p.rows(), n = q.rows();
  double best = std::numeric_limits<double>::infinity();
  std::function<void(Eigen::Index, Eigen::Index, double)> walk = [&](Eigen::Index i, Eigen::Index j,
                                                                     double worst) {
    worst = std::max(worst, (p.row(i) - q.row(j)).norm());
    if (i == m - 1 && j == n - 1) {
      best = std::min(best, worst);
      return;
    }
    if (i + 1 < m)
      walk(i + 1, j, worst);
    if (j + 1 < n)
      walk(i, j + 1, worst);
    if (i + 1 < m && j + 1 < n)
      walk(i + 1, j + 1, worst);
  };
  walk(0, 0, 0.0);
  return best;
}

inline double brute_force_hausdorff(const Curve& p, const Curve& q) {
  auto directed = [](const Curve& a, const Curve& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < b.rows(); ++j)
        nearest = std::min(nearest, std::hypot(a(i, 0) - b(j, 0), a(i, 1) - b(j, 1)));
      worst = std::max(worst, nearest);
    }
    return worst;
  };
  return std::max(directed(p, q), directed(q, p));
}

inline Curve random_curve(std::mt19937_64& gen, int max_points = 6) {
  const int n = 1 + int(gen() % std::uint64_t(max_points));
  Curve c(n, 2);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < n; ++i) {
    c(i, 0) = u(gen);
    c(i, 1) = u(gen);
  }
  return c;
}

// ----------------------------------------------------------------- AoC

/// Category from integer member counts, decided by which categories share
/// the highest count.
inline AocCategory reference_category(int below, int normal, int above) {
  const int top = std::max({below, normal, above});
  const bool b = below == top, n = normal == top, a = above == top;
  if (a && !b && !n)
    return AocCategory::above_normal;
  if (n && !a && !b)
    return AocCategory::normal;
  if (b && !a && !n)
    return AocCategory::below_normal;
  if (a && n && !b)
    return AocCategory::normal_to_above;
  // below/above tie, below/normal tie, or all three equal
  return AocCategory::inconclusive;
}

// ---------------------------------------------------------- crop model

/// First violated within-year invariant of a one-year simulation, recomputing
/// the phenology from the weather: zero before sowing and before anthesis,
/// nondecreasing, frozen once maturity is reached. Empty when all hold.
inline std::string crop_invariant_violation(const WeatherSeries& w, const CropParams& crop,
                                            const YieldSeries& y) {
  double gdd = 0.0;
  bool mature = false;
  for (int doy = 1; doy <= kDaysPerYear; ++doy) {
    const int d = doy - 1;
    const double prev = d > 0 ? y.twso[d - 1] : 0.0;
    if (y.twso[d] < prev)
      return "decrease on day " + std::to_string(doy);
    if (doy < crop.sow_doy) {
      if (y.twso[d] != 0.0)
        return "nonzero before sowing on day " + std::to_string(doy);
      continue;
    }
    if (mature) {
      if (y.twso[d] != prev)
        return "change after maturity on day " + std::to_string(doy);
      continue;
    }
    gdd += std::max(0.0, 0.5 * (w.tmax[d] + w.tmin[d]) - crop.t_base);
    if (gdd < crop.gdd_anthesis && y.twso[d] != 0.0)
      return "nonzero before anthesis on day " + std::to_string(doy);
    if (gdd >= crop.gdd_maturity) {
      mature = true;
      if (y.twso[d] != prev)
        return "growth on the maturity day " + std::to_string(doy);
    }
  }
  return {};
}

} // namespace secs::oracle

#endif // SECS_TESTS_ORACLES_HPP
