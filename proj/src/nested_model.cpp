#include "secs/nested_model.hpp"

#include "secs/error.hpp"

#include <cmath>

namespace secs {
namespace {

constexpr const char* kModule = "neuralcore";

double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

template <typename Scalar>
void fill_uniform(MatrixX<Scalar>& m, double bound, std::mt19937_64& gen) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<Scalar>((2.0 * unit_uniform(gen) - 1.0) * bound);
}

} // namespace

template <typename Scalar>
const std::vector<std::string>& NestedParams<Scalar>::tensor_names() {
  static const std::vector<std::string> names{"inner.W", "inner.U", "inner.b", "outer.W",
                                              "outer.U", "outer.b", "head.W",  "head.b"};
  return names;
}

template <typename Scalar>
std::vector<MatrixX<Scalar>*> NestedParams<Scalar>::tensors() {
  return {&inner.W, &inner.U, &inner.b, &outer.W, &outer.U, &outer.b, &head_W, &head_b};
}

template <typename Scalar>
std::vector<const MatrixX<Scalar>*> NestedParams<Scalar>::tensors() const {
  return {&inner.W, &inner.U, &inner.b, &outer.W, &outer.U, &outer.b, &head_W, &head_b};
}

template <typename Scalar>
NestedParams<Scalar> NestedParams<Scalar>::zeros_like() const {
  NestedParams z = *this;
  for (auto* t : z.tensors())
    t->setZero();
  return z;
}

template <typename Scalar>
Eigen::Index NestedParams<Scalar>::size() const {
  Eigen::Index n = 0;
  for (const auto* t : tensors())
    n += t->size();
  return n;
}

template <typename Scalar>
void NestedModel<Scalar>::validate() const {
  params.inner.validate();
  params.outer.validate();
  spec.validate();
  if (params.inner.hidden_dim() != params.outer.input_dim())
    throw ShapeError(kModule, "inner hidden size must equal outer input size");
  if (params.head_W.rows() != spec.batch_len || params.head_W.cols() != params.outer.hidden_dim() ||
      params.head_b.rows() != spec.batch_len || params.head_b.cols() != 1)
    throw ShapeError(kModule, "head must map the outer state to batch_len outputs");
  if (params.inner.input_dim() != spec.n_features())
    throw ShapeError(kModule, "inner input size does not match the feature spec");
  if (!params.head_W.allFinite() || !params.head_b.allFinite())
    throw NumericError(kModule, "non-finite head parameters");
  if (!(dropout_rate >= 0 && dropout_rate < 1))
    throw ConfigError(kModule, "dropout rate must lie in [0,1)");
}

template <typename Scalar>
ForwardResult<Scalar> forward(const NestedModel<Scalar>& model,
                              std::span<const BatchedSequence<Scalar>> inputs, Mode mode,
                              std::mt19937_64* rng) {
  if (inputs.empty())
    throw ShapeError(kModule, "forward needs at least one sample");
  const auto& first = inputs.front();
  const int S = static_cast<int>(inputs.size());
  const int B = first.n_batches;
  const int L = first.batch_len;
  const int F = first.n_features();
  const int H = model.hidden_dim();
  if (F != model.n_features())
    throw ShapeError(kModule, "input has " + std::to_string(F) + " features, model expects " +
                                  std::to_string(model.n_features()));
  if (L != model.params.head_W.rows())
    throw ShapeError(kModule, "input batch length does not match the model head");
  for (const auto& in : inputs)
    if (in.n_batches != B || in.batch_len != L || in.n_features() != F || in.n_days != first.n_days)
      throw ShapeError(kModule, "samples in one forward block must share their shape");
  const bool training = mode == Mode::train;
  const bool use_dropout = training && model.dropout_rate > 0.0;
  if (use_dropout && rng == nullptr)
    throw StateError(kModule, "train-mode forward needs a random stream for dropout");

  ForwardResult<Scalar> result;
  ForwardCache<Scalar>* cache = nullptr;
  if (training) {
    cache = &result.cache.emplace();
    cache->n_samples = S;
    cache->n_batches = B;
    cache->batch_len = L;
    cache->n_days = first.n_days;
    for (const auto& in : inputs)
      cache->masks.push_back(in.mask);
  }

  // Inner level: every (batch, sample) pair is an independent column.
  const Eigen::Index n_inner = static_cast<Eigen::Index>(B) * S;
  MatrixX<Scalar> h, c;
  for (int t = 0; t < L; ++t) {
    MatrixX<Scalar> x(F, n_inner);
    for (int b = 0; b < B; ++b)
      for (int s = 0; s < S; ++s)
        x.col(static_cast<Eigen::Index>(b) * S + s) = inputs[s].slots.col(b * L + t);
    LstmStep<Scalar> step = t == 0 ? lstm_cell_first_step(x, model.params.inner)
                                   : lstm_cell_step(x, h, c, model.params.inner);
    h = step.h;
    c = step.c;
    if (cache) {
      cache->inner_x.push_back(std::move(x));
      cache->inner_steps.push_back(std::move(step));
    }
  }
  const MatrixX<Scalar> summaries = std::move(h);

  // Outer level across batches, then dropout and the ReLU head.
  const Scalar keep_scale = Scalar(1.0 / (1.0 - model.dropout_rate));
  MatrixX<Scalar> slot_out(static_cast<Eigen::Index>(B) * L, S);
  MatrixX<Scalar> ho, co;
  for (int b = 0; b < B; ++b) {
    MatrixX<Scalar> x = summaries.middleCols(static_cast<Eigen::Index>(b) * S, S);
    LstmStep<Scalar> step = b == 0 ? lstm_cell_first_step(x, model.params.outer)
                                   : lstm_cell_step(x, ho, co, model.params.outer);
    ho = step.h;
    co = step.c;
    MatrixX<Scalar> head_in = ho;
    MatrixX<Scalar> mask;
    if (use_dropout) {
      mask.resize(H, S);
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        for (Eigen::Index i = 0; i < mask.rows(); ++i)
          mask(i, j) = unit_uniform(*rng) < model.dropout_rate ? Scalar(0) : keep_scale;
      head_in.array() *= mask.array();
    }
    MatrixX<Scalar> pre(L, S);
    pre.noalias() = model.params.head_W * head_in;
    pre.colwise() += model.params.head_b.col(0);
    slot_out.middleRows(static_cast<Eigen::Index>(b) * L, L) = pre.cwiseMax(Scalar(0));
    if (cache) {
      cache->outer_x.push_back(std::move(x));
      cache->outer_steps.push_back(std::move(step));
      cache->dropout_mask.push_back(std::move(mask));
      cache->head_in.push_back(std::move(head_in));
      cache->head_pre.push_back(std::move(pre));
    }
  }

  result.predictions.resize(first.n_days, S);
  for (int s = 0; s < S; ++s) {
    Eigen::Index row = 0;
    for (int k = 0; k < B * L; ++k)
      if (inputs[s].mask[k]) {
        if (row == first.n_days)
          throw ShapeError(kModule, "mask marks more slots than days");
        result.predictions(row++, s) = slot_out(k, s);
      }
    if (row != first.n_days)
      throw ShapeError(kModule, "mask marks fewer slots than days");
  }
  return result;
}

template <typename Scalar>
NestedParams<Scalar> backward(const NestedModel<Scalar>& model,
                              const std::optional<ForwardCache<Scalar>>& cache_opt,
                              const MatrixX<Scalar>& d_out) {
  if (!cache_opt)
    throw StateError(kModule, "backward requires the cache of a train-mode forward pass");
  const ForwardCache<Scalar>& cache = *cache_opt;
  const int S = cache.n_samples;
  const int B = cache.n_batches;
  const int L = cache.batch_len;
  const int H = model.hidden_dim();
  if (d_out.rows() != cache.n_days || d_out.cols() != S)
    throw ShapeError(kModule, "output gradient shape does not match the forward pass");

  NestedParams<Scalar> grad = model.params.zeros_like();

  // Scatter day gradients onto slots; masked slots receive nothing.
  MatrixX<Scalar> d_slot = MatrixX<Scalar>::Zero(static_cast<Eigen::Index>(B) * L, S);
  for (int s = 0; s < S; ++s) {
    Eigen::Index row = 0;
    for (int k = 0; k < B * L; ++k)
      if (cache.masks[static_cast<std::size_t>(s)][k])
        d_slot(k, s) = d_out(row++, s);
  }

  MatrixX<Scalar> d_summaries(H, static_cast<Eigen::Index>(B) * S);
  MatrixX<Scalar> dh_next, dc_next;
  for (int b = B - 1; b >= 0; --b) {
    const auto ub = static_cast<std::size_t>(b);
    const MatrixX<Scalar>& pre = cache.head_pre[ub];
    const MatrixX<Scalar> d_pre =
        (pre.array() > Scalar(0))
            .select(d_slot.middleRows(static_cast<Eigen::Index>(b) * L, L), Scalar(0));
    grad.head_W.noalias() += d_pre * cache.head_in[ub].transpose();
    grad.head_b += d_pre.rowwise().sum();

    MatrixX<Scalar> dh(H, S);
    dh.noalias() = model.params.head_W.transpose() * d_pre;
    if (cache.dropout_mask[ub].size() != 0)
      dh.array() *= cache.dropout_mask[ub].array();
    if (dh_next.size() != 0)
      dh += dh_next;

    static const MatrixX<Scalar> kEmpty;
    const MatrixX<Scalar>& h_prev = b > 0 ? cache.outer_steps[ub - 1].h : kEmpty;
    const MatrixX<Scalar>& c_prev = b > 0 ? cache.outer_steps[ub - 1].c : kEmpty;
    LstmStepGrad<Scalar> g = lstm_cell_backward(model.params.outer, cache.outer_x[ub], h_prev,
                                                c_prev, cache.outer_steps[ub], dh, dc_next,
                                                /*want_dx=*/true, grad.outer);
    d_summaries.middleCols(static_cast<Eigen::Index>(b) * S, S) = g.dx;
    dh_next = std::move(g.dh_prev);
    dc_next = std::move(g.dc_prev);
  }

  MatrixX<Scalar> dh = std::move(d_summaries);
  MatrixX<Scalar> dc;
  for (int t = L - 1; t >= 0; --t) {
    const auto ut = static_cast<std::size_t>(t);
    static const MatrixX<Scalar> kEmpty;
    const MatrixX<Scalar>& h_prev = t > 0 ? cache.inner_steps[ut - 1].h : kEmpty;
    const MatrixX<Scalar>& c_prev = t > 0 ? cache.inner_steps[ut - 1].c : kEmpty;
    LstmStepGrad<Scalar> g = lstm_cell_backward(model.params.inner, cache.inner_x[ut], h_prev,
                                                c_prev, cache.inner_steps[ut], dh, dc,
                                                /*want_dx=*/false, grad.inner);
    dh = std::move(g.dh_prev);
    dc = std::move(g.dc_prev);
  }
  return grad;
}

template <typename Scalar>
NestedModel<Scalar> init_model(const FeatureSpec& spec, int hidden, std::uint64_t seed,
                               double dropout_rate) {
  spec.validate();
  if (hidden < 1)
    throw ConfigError(kModule, "hidden size must be >= 1");
  const int F = spec.n_features();
  const int L = spec.batch_len;
  NestedModel<Scalar> m;
  m.spec = spec;
  m.dropout_rate = dropout_rate;
  m.params.inner = LstmParams<Scalar>::zeros(F, hidden);
  m.params.outer = LstmParams<Scalar>::zeros(hidden, hidden);
  m.params.head_W = MatrixX<Scalar>::Zero(L, hidden);
  m.params.head_b = MatrixX<Scalar>::Zero(L, 1);

  std::mt19937_64 gen(seed);
  fill_uniform(m.params.inner.W, 1.0 / std::sqrt(double(F)), gen);
  fill_uniform(m.params.inner.U, 1.0 / std::sqrt(double(hidden)), gen);
  fill_uniform(m.params.outer.W, 1.0 / std::sqrt(double(hidden)), gen);
  fill_uniform(m.params.outer.U, 1.0 / std::sqrt(double(hidden)), gen);
  fill_uniform(m.params.head_W, 1.0 / std::sqrt(double(hidden)), gen);
  m.params.inner.b.middleRows(hidden, hidden).setConstant(Scalar(1));
  m.params.outer.b.middleRows(hidden, hidden).setConstant(Scalar(1));

  m.scaler.feature_mean = Eigen::VectorXd::Zero(F);
  m.scaler.feature_sd = Eigen::VectorXd::Ones(F);
  m.scaler.target_scale = 1.0;
  m.validate();
  return m;
}

#define SECS_INSTANTIATE_NESTED(T)                                                            \
  template struct NestedParams<T>;                                                            \
  template struct NestedModel<T>;                                                             \
  template ForwardResult<T> forward<T>(const NestedModel<T>&,                                 \
                                       std::span<const BatchedSequence<T>>, Mode,             \
                                       std::mt19937_64*);                                     \
  template NestedParams<T> backward<T>(const NestedModel<T>&,                                 \
                                       const std::optional<ForwardCache<T>>&,                 \
                                       const MatrixX<T>&);                                    \
  template NestedModel<T> init_model<T>(const FeatureSpec&, int, std::uint64_t, double);

SECS_INSTANTIATE_NESTED(float)
SECS_INSTANTIATE_NESTED(double)

#undef SECS_INSTANTIATE_NESTED

} // namespace secs
