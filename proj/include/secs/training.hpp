#ifndef SECS_TRAINING_HPP
#define SECS_TRAINING_HPP

#include "secs/datamodel.hpp"
#include "secs/nested_model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace secs {

struct TrainConfig {
  int epochs = 100;
  int minibatch_size = 32; ///< cell-years per optimizer step
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double huber_delta = 0.5;
  double dropout_rate = 0.3;
  double split_ratio = 0.9;
  std::uint64_t seed = 42;
  int early_stop_patience = 10;
  int hidden = 128;
  FeatureSpec features;

  void validate() const;
};

/// Loss value (64-bit accumulation) and its gradient with respect to `pred`.
template <typename Scalar>
struct HuberResult {
  double loss = 0.0;
  MatrixX<Scalar> d_pred;
  Eigen::Index n_valid = 0;
};

/// Mean Huber loss over unmasked elements. `mask` may be empty (all valid).
/// Throws EmptyLossError when every element is masked.
template <typename Scalar>
HuberResult<Scalar> huber_loss(const MatrixX<Scalar>& pred, const MatrixX<Scalar>& target,
                               const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
                               double delta);

template <typename Scalar>
HuberResult<Scalar> huber_loss(const MatrixX<Scalar>& pred, const MatrixX<Scalar>& target,
                               double delta) {
  return huber_loss(pred, target, Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>(), delta);
}

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamHyper from(const TrainConfig& cfg) {
    return {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
  }
};

template <typename Scalar>
struct AdamState {
  std::vector<MatrixX<Scalar>> m;
  std::vector<MatrixX<Scalar>> v;
  long long t = 0;

  static AdamState like(std::span<const MatrixX<Scalar>* const> params);
};

/// One bias-corrected Adam update applied in place.
template <typename Scalar>
void adam_step(std::span<MatrixX<Scalar>* const> params,
               std::span<const MatrixX<Scalar>* const> grads, AdamState<Scalar>& state,
               const AdamHyper& hyper);

template <typename Scalar>
void adam_step(NestedParams<Scalar>& params, const NestedParams<Scalar>& grads,
               AdamState<Scalar>& state, const AdamHyper& hyper) {
  const auto p = params.tensors();
  const auto g = grads.tensors();
  adam_step<Scalar>(std::span<MatrixX<Scalar>* const>(p),
                    std::span<const MatrixX<Scalar>* const>(g), state, hyper);
}

struct DatasetSplit {
  std::vector<CellId> train;
  std::vector<CellId> test;
};

/// Whole cells go to one side. |train| = round(ratio * n), clamped so each
/// side keeps at least one cell.
DatasetSplit split_dataset(std::span<const CellId> cells, double ratio, std::uint64_t seed);

enum class Purpose { fit, validate };

/// Read access to an aligned weather/yield dataset. Each access states why
/// the data is read so tests can check that held-out cells only ever feed
/// validation.
class TrainingSource {
public:
  virtual ~TrainingSource() = default;
  virtual std::vector<CellId> cells() const = 0;
  virtual const WeatherSeries& weather(const std::string& cell_id, Purpose purpose) const = 0;
  virtual const YieldSeries& yields(const std::string& cell_id, Purpose purpose) const = 0;
};

/// Borrowing source over loaded tables. Throws AlignmentError when cell sets
/// or year ranges disagree.
class InMemorySource : public TrainingSource {
public:
  InMemorySource(std::span<const WeatherSeries> weather, std::span<const YieldSeries> yields);

  std::vector<CellId> cells() const override;
  const WeatherSeries& weather(const std::string& cell_id, Purpose purpose) const override;
  const YieldSeries& yields(const std::string& cell_id, Purpose purpose) const override;

private:
  std::vector<const WeatherSeries*> weather_;
  std::vector<const YieldSeries*> yields_;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> seconds;
  int best_epoch = -1;

  std::size_t epochs_completed() const { return train_loss.size(); }
};

struct TrainResult {
  NestedModel<float> model;
  TrainHistory history;
  DatasetSplit split;
};

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

/// Split by cell, fit the scaler on training cells only, then minibatch Adam
/// on the Huber loss of scaled targets with early stopping on the held-out
/// cells. Returns the best-validation model. Deterministic for a fixed seed.
TrainResult train(const TrainingSource& source, const std::string& crop_tag,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

TrainResult train(std::span<const WeatherSeries> weather, std::span<const YieldSeries> yields,
                  const std::string& crop_tag, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Samples of a cell set, ready for the network.
struct SampleSet {
  std::vector<BatchedSequence<float>> inputs;
  MatrixX<float> targets; ///< 365 x n_samples, scaled
  std::vector<std::string> cell_ids;
  std::vector<int> years;
};

SampleSet make_samples(const TrainingSource& source, std::span<const CellId> cells,
                       Purpose purpose, const FeatureSpec& spec, const Scaler& scaler);

/// Infer-mode predictions (scaled) for every sample, processed in blocks.
MatrixX<float> predict_scaled(const NestedModel<float>& model,
                              std::span<const BatchedSequence<float>> inputs, int block = 32);

/// Daily TWSO prediction (kg/ha) for every year of a weather series.
YieldSeries predict_series(const NestedModel<float>& model, const WeatherSeries& weather);

/// Huber loss of the per-day mean training curve evaluated on `eval`.
double climatology_baseline_loss(const MatrixX<float>& train_targets,
                                 const MatrixX<float>& eval_targets, double delta);

} // namespace secs

#endif // SECS_TRAINING_HPP
