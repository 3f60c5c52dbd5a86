#ifndef SECS_NESTED_MODEL_HPP
#define SECS_NESTED_MODEL_HPP

#include "secs/features.hpp"
#include "secs/lstm.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace secs {

/// Learnable tensors of the nested recurrent network. Also used as the
/// gradient record, which has identical shapes.
template <typename Scalar>
struct NestedParams {
  LstmParams<Scalar> inner; ///< features -> H, runs within each batch
  LstmParams<Scalar> outer; ///< H -> H, runs across batches
  MatrixX<Scalar> head_W;   ///< batch_len x H
  MatrixX<Scalar> head_b;   ///< batch_len x 1

  static const std::vector<std::string>& tensor_names();
  std::vector<MatrixX<Scalar>*> tensors();
  std::vector<const MatrixX<Scalar>*> tensors() const;

  NestedParams zeros_like() const;
  Eigen::Index size() const;

  template <typename Other>
  NestedParams<Other> cast() const {
    return {inner.template cast<Other>(), outer.template cast<Other>(),
            head_W.template cast<Other>(), head_b.template cast<Other>()};
  }
};

/// Inner LSTM over the rows of each batch (state reset per batch), outer LSTM
/// over the per-batch summaries, dropout on the outer hidden states, and a
/// shared ReLU dense head emitting one value per day of the batch.
template <typename Scalar>
struct NestedModel {
  NestedParams<Scalar> params;
  double dropout_rate = 0.3;
  FeatureSpec spec;
  Scaler scaler;

  int hidden_dim() const { return params.inner.hidden_dim(); }
  int n_features() const { return params.inner.input_dim(); }
  void validate() const;

  template <typename Other>
  NestedModel<Other> cast() const {
    return {params.template cast<Other>(), dropout_rate, spec, scaler};
  }
};

enum class Mode { train, infer };

/// Activations kept by a train-mode forward pass for backpropagation.
template <typename Scalar>
struct ForwardCache {
  int n_samples = 0;
  int n_batches = 0;
  int batch_len = 0;
  int n_days = 0;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> masks;

  // Inner columns are ordered batch-major: column b * n_samples + s.
  std::vector<MatrixX<Scalar>> inner_x;
  std::vector<LstmStep<Scalar>> inner_steps;
  std::vector<MatrixX<Scalar>> outer_x;
  std::vector<LstmStep<Scalar>> outer_steps;
  std::vector<MatrixX<Scalar>> dropout_mask; ///< 0 or 1/(1-rate), H x S
  std::vector<MatrixX<Scalar>> head_in;      ///< dropped outer states
  std::vector<MatrixX<Scalar>> head_pre;     ///< batch_len x S, before ReLU
};

template <typename Scalar>
struct ForwardResult {
  MatrixX<Scalar> predictions; ///< n_days x n_samples, scaled TWSO, >= 0
  std::optional<ForwardCache<Scalar>> cache;
};

/// Runs a block of samples through the network. All samples must share
/// feature width, batch count and batch length. `rng` drives the dropout
/// masks and is required in train mode only.
template <typename Scalar>
ForwardResult<Scalar> forward(const NestedModel<Scalar>& model,
                              std::span<const BatchedSequence<Scalar>> inputs, Mode mode,
                              std::mt19937_64* rng = nullptr);

template <typename Scalar>
ForwardResult<Scalar> forward(const NestedModel<Scalar>& model, const BatchedSequence<Scalar>& input,
                              Mode mode, std::mt19937_64* rng = nullptr) {
  return forward(model, std::span<const BatchedSequence<Scalar>>(&input, 1), mode, rng);
}

/// Exact gradient of <d_out, predictions> with respect to every parameter.
/// `d_out` is n_days x n_samples. Throws StateError without a cache.
template <typename Scalar>
NestedParams<Scalar> backward(const NestedModel<Scalar>& model,
                              const std::optional<ForwardCache<Scalar>>& cache,
                              const MatrixX<Scalar>& d_out);

/// Uniform(-s, s) weights with s = 1/sqrt(fan_in), forget-gate bias 1, other
/// biases 0. The scaler is the identity until a training run fits one.
template <typename Scalar>
NestedModel<Scalar> init_model(const FeatureSpec& spec, int hidden, std::uint64_t seed,
                               double dropout_rate = 0.3);

} // namespace secs

#endif // SECS_NESTED_MODEL_HPP
