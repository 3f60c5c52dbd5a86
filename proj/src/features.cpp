#include "secs/features.hpp"

#include "secs/error.hpp"

#include <algorithm>
#include <cmath>

namespace secs {
namespace {
constexpr const char* kModule = "features";
}

void FeatureSpec::validate() const {
  if (batch_len < 1)
    throw ConfigError(kModule, "batch_len must be >= 1");
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] < 1)
      throw ConfigError(kModule, "lags must be strictly positive");
    if (i > 0 && lags[i] <= lags[i - 1])
      throw ConfigError(kModule, "lags must be strictly increasing");
    if (lags[i] > kDaysPerYear - 1)
      throw ConfigError(kModule, "lag " + std::to_string(lags[i]) + " exceeds 364 days");
  }
}

int FeatureSpec::n_features() const {
  return 3 * (1 + static_cast<int>(lags.size())) + (include_doy ? 1 : 0);
}

std::vector<std::string> FeatureSpec::column_names() const {
  std::vector<std::string> names{"tmax", "tmin", "precip"};
  for (const char* var : {"tmax", "tmin", "precip"})
    for (int lag : lags)
      names.push_back(std::string(var) + "_lag" + std::to_string(lag));
  if (include_doy)
    names.emplace_back("doy");
  return names;
}

FeatureSeries build_features(const WeatherSeries& weather, int year_index, const FeatureSpec& spec) {
  spec.validate();
  const WeatherSeries w = weather.year(year_index);
  const int n_lags = static_cast<int>(spec.lags.size());
  FeatureSeries out;
  out.cell = w.cell;
  out.year = w.start_year;
  out.matrix.resize(kDaysPerYear, spec.n_features());
  const Eigen::VectorXd* vars[3] = {&w.tmax, &w.tmin, &w.precip};
  for (int v = 0; v < 3; ++v) {
    const Eigen::VectorXd& series = *vars[v];
    out.matrix.col(v) = series;
    for (int k = 0; k < n_lags; ++k) {
      const int lag = spec.lags[static_cast<std::size_t>(k)];
      auto col = out.matrix.col(3 + v * n_lags + k);
      for (int d = 0; d < kDaysPerYear; ++d)
        col[d] = series[std::max(0, d - lag)];
    }
  }
  if (spec.include_doy)
    for (int d = 0; d < kDaysPerYear; ++d)
      out.matrix(d, spec.n_features() - 1) = (d + 1) / double(kDaysPerYear);
  return out;
}

Scaler fit_scaler(std::span<const FeatureSeries> train, std::span<const YieldSeries> train_targets) {
  if (train.empty() || train_targets.empty())
    throw ConfigError(kModule, "cannot fit a scaler on an empty training set");
  const Eigen::Index n_features = train.front().matrix.cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n_features);
  Eigen::Index rows = 0;
  for (const auto& x : train) {
    if (x.matrix.cols() != n_features)
      throw ShapeError(kModule, "training feature widths differ");
    sum += x.matrix.colwise().sum().transpose();
    rows += x.matrix.rows();
  }
  Scaler s;
  s.feature_mean = sum / double(rows);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(n_features);
  for (const auto& x : train)
    sq += (x.matrix.rowwise() - s.feature_mean.transpose()).array().square().colwise().sum().transpose().matrix();
  s.feature_sd = (sq / double(rows)).array().sqrt().max(Scaler::kMinSd).matrix();
  double max_target = 0.0;
  for (const auto& y : train_targets)
    if (y.twso.size() > 0)
      max_target = std::max(max_target, y.twso.maxCoeff());
  s.target_scale = std::max(max_target, Scaler::kMinTargetScale);
  return s;
}

FeatureSeries apply_scaler(const FeatureSeries& x, const Scaler& s) {
  if (x.matrix.cols() != s.feature_mean.size() || s.feature_sd.size() != s.feature_mean.size())
    throw ShapeError(kModule, "feature width " + std::to_string(x.matrix.cols()) +
                                  " does not match scaler width " +
                                  std::to_string(s.feature_mean.size()));
  FeatureSeries out;
  out.cell = x.cell;
  out.year = x.year;
  out.matrix = (x.matrix.rowwise() - s.feature_mean.transpose()).array().rowwise() /
               s.feature_sd.transpose().array();
  return out;
}

Eigen::VectorXd scale_target(const Eigen::VectorXd& twso, const Scaler& s) {
  return twso / s.target_scale;
}

Eigen::VectorXd unscale_target(const Eigen::VectorXd& scaled, const Scaler& s) {
  return scaled * s.target_scale;
}

template <typename Scalar>
BatchedSequence<Scalar> batch_sequence(const Eigen::MatrixXd& days_by_features, int batch_len) {
  if (batch_len < 1)
    throw ConfigError(kModule, "batch_len must be >= 1");
  const int n_days = static_cast<int>(days_by_features.rows());
  if (n_days < 1)
    throw ShapeError(kModule, "cannot batch an empty sequence");
  BatchedSequence<Scalar> seq;
  seq.batch_len = batch_len;
  seq.n_days = n_days;
  seq.n_batches = (n_days + batch_len - 1) / batch_len;
  const int n_slots = seq.n_slots();
  seq.slots.resize(days_by_features.cols(), n_slots);
  seq.mask.resize(n_slots);
  for (int k = 0; k < n_slots; ++k) {
    const int day = std::min(k, n_days - 1);
    seq.slots.col(k) = days_by_features.row(day).transpose().template cast<Scalar>();
    seq.mask[k] = k < n_days;
  }
  return seq;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> unbatch(const BatchedSequence<Scalar>& seq) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(seq.mask.count(), seq.slots.rows());
  Eigen::Index row = 0;
  for (int k = 0; k < seq.n_slots(); ++k)
    if (seq.mask[k])
      out.row(row++) = seq.slots.col(k).transpose();
  return out;
}

template BatchedSequence<float> batch_sequence<float>(const Eigen::MatrixXd&, int);
template BatchedSequence<double> batch_sequence<double>(const Eigen::MatrixXd&, int);
template Eigen::MatrixXf unbatch<float>(const BatchedSequence<float>&);
template Eigen::MatrixXd unbatch<double>(const BatchedSequence<double>&);

} // namespace secs
