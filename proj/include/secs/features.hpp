#ifndef SECS_FEATURES_HPP
#define SECS_FEATURES_HPP

#include "secs/datamodel.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace secs {

struct FeatureSpec {
  std::vector<int> lags{1, 2, 3, 4, 5};
  bool include_doy = true;
  int batch_len = 6;

  void validate() const;
  /// 3 * (1 + |lags|) + include_doy
  int n_features() const;
  /// Column names in matrix order.
  std::vector<std::string> column_names() const;

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// Engineered inputs of one cell-year: 365 rows (days) by n_features columns
/// ordered [tmax, tmin, precip, tmax lags, tmin lags, precip lags, doy/365].
struct FeatureSeries {
  CellId cell;
  int year = 0;
  Eigen::MatrixXd matrix;
};

/// Lags reaching before Jan 1 replicate the Jan 1 values, so each cell-year
/// is self-contained.
FeatureSeries build_features(const WeatherSeries& weather, int year_index, const FeatureSpec& spec);

struct Scaler {
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_sd;
  double target_scale = 1.0;

  static constexpr double kMinSd = 1e-6;
  static constexpr double kMinTargetScale = 1.0;
};

/// Population mean/sd per feature over every training row; target_scale is
/// the largest training TWSO (floored at 1 kg/ha).
Scaler fit_scaler(std::span<const FeatureSeries> train, std::span<const YieldSeries> train_targets);

FeatureSeries apply_scaler(const FeatureSeries& x, const Scaler& s);

Eigen::VectorXd scale_target(const Eigen::VectorXd& twso, const Scaler& s);
Eigen::VectorXd unscale_target(const Eigen::VectorXd& scaled, const Scaler& s);

/// Non-overlapping fixed-length batches of a daily feature matrix, stored
/// column-per-slot: `slots` is F x (n_batches * batch_len) and slot
/// b * batch_len + t holds day b * batch_len + t. Trailing slots past the
/// last day replicate it and are masked out.
template <typename Scalar>
struct BatchedSequence {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix slots;
  Eigen::Array<bool, Eigen::Dynamic, 1> mask;
  int n_batches = 0;
  int batch_len = 0;
  int n_days = 0;

  int n_features() const { return static_cast<int>(slots.rows()); }
  int n_slots() const { return n_batches * batch_len; }
};

template <typename Scalar>
BatchedSequence<Scalar> batch_sequence(const Eigen::MatrixXd& days_by_features, int batch_len);

template <typename Scalar>
BatchedSequence<Scalar> batch_sequence(const FeatureSeries& x, const FeatureSpec& spec) {
  return batch_sequence<Scalar>(x.matrix, spec.batch_len);
}

/// Unmasked slots back in day order (days x F).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> unbatch(const BatchedSequence<Scalar>& seq);

/// Weather year -> features -> scaled -> batched, the model's input path.
template <typename Scalar>
BatchedSequence<Scalar> prepare_input(const WeatherSeries& weather, int year_index,
                                      const FeatureSpec& spec, const Scaler& scaler) {
  return batch_sequence<Scalar>(apply_scaler(build_features(weather, year_index, spec), scaler),
                                spec);
}

} // namespace secs

#endif // SECS_FEATURES_HPP
