#include "secs/training.hpp"

#include "secs/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace secs {
namespace {

constexpr const char* kModule = "training";

std::size_t bounded(std::mt19937_64& gen, std::size_t n) {
  return static_cast<std::size_t>(gen() % n);
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& gen) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[bounded(gen, i)]);
}

} // namespace

void TrainConfig::validate() const {
  if (epochs < 1)
    throw ConfigError(kModule, "epochs must be >= 1");
  if (minibatch_size < 1)
    throw ConfigError(kModule, "minibatch_size must be >= 1");
  if (!(learning_rate > 0))
    throw ConfigError(kModule, "learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ConfigError(kModule, "beta1 and beta2 must lie in [0,1)");
  if (!(epsilon > 0))
    throw ConfigError(kModule, "epsilon must be > 0");
  if (!(huber_delta > 0))
    throw ConfigError(kModule, "huber_delta must be > 0");
  if (!(dropout_rate >= 0 && dropout_rate < 1))
    throw ConfigError(kModule, "dropout_rate must lie in [0,1)");
  if (!(split_ratio > 0 && split_ratio < 1))
    throw ConfigError(kModule, "split_ratio must lie in (0,1)");
  if (early_stop_patience < 1)
    throw ConfigError(kModule, "early_stop_patience must be >= 1");
  if (hidden < 1)
    throw ConfigError(kModule, "hidden must be >= 1");
  features.validate();
}

template <typename Scalar>
HuberResult<Scalar> huber_loss(const MatrixX<Scalar>& pred, const MatrixX<Scalar>& target,
                               const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
                               double delta) {
  if (!(delta > 0))
    throw ConfigError(kModule, "huber delta must be > 0");
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError(kModule, "prediction and target shapes differ");
  const bool masked = mask.size() != 0;
  if (masked && (mask.rows() != pred.rows() || mask.cols() != pred.cols()))
    throw ShapeError(kModule, "mask shape differs from predictions");

  HuberResult<Scalar> r;
  r.d_pred = MatrixX<Scalar>::Zero(pred.rows(), pred.cols());
  r.n_valid = masked ? mask.count() : pred.size();
  if (r.n_valid == 0)
    throw EmptyLossError(kModule, "every element is masked; the loss is undefined");
  const double inv_n = 1.0 / double(r.n_valid);
  double total = 0.0;
  for (Eigen::Index j = 0; j < pred.cols(); ++j)
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      if (masked && !mask(i, j))
        continue;
      const double a = double(pred(i, j)) - double(target(i, j));
      const double abs_a = std::abs(a);
      if (abs_a <= delta) {
        total += 0.5 * a * a;
        r.d_pred(i, j) = static_cast<Scalar>(a * inv_n);
      } else {
        total += delta * (abs_a - 0.5 * delta);
        r.d_pred(i, j) = static_cast<Scalar>((a > 0 ? delta : -delta) * inv_n);
      }
    }
  r.loss = total * inv_n;
  return r;
}

template <typename Scalar>
AdamState<Scalar> AdamState<Scalar>::like(std::span<const MatrixX<Scalar>* const> params) {
  AdamState s;
  for (const auto* p : params) {
    s.m.push_back(MatrixX<Scalar>::Zero(p->rows(), p->cols()));
    s.v.push_back(MatrixX<Scalar>::Zero(p->rows(), p->cols()));
  }
  return s;
}

template <typename Scalar>
void adam_step(std::span<MatrixX<Scalar>* const> params,
               std::span<const MatrixX<Scalar>* const> grads, AdamState<Scalar>& state,
               const AdamHyper& hyper) {
  if (params.size() != grads.size())
    throw ShapeError(kModule, "parameter and gradient lists differ in length");
  if (state.m.empty() && state.t == 0)
    for (const auto* p : params) {
      state.m.push_back(MatrixX<Scalar>::Zero(p->rows(), p->cols()));
      state.v.push_back(MatrixX<Scalar>::Zero(p->rows(), p->cols()));
    }
  if (state.m.size() != params.size())
    throw ShapeError(kModule, "optimizer state does not match the parameter list");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (params[k]->rows() != grads[k]->rows() || params[k]->cols() != grads[k]->cols() ||
        state.m[k].rows() != params[k]->rows() || state.m[k].cols() != params[k]->cols())
      throw ShapeError(kModule, "gradient or state shape differs from its parameter");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, double(state.t));
  const Scalar b1 = Scalar(hyper.beta1), b2 = Scalar(hyper.beta2);
  const Scalar step = Scalar(hyper.learning_rate / bc1);
  const Scalar inv_sqrt_bc2 = Scalar(1.0 / std::sqrt(bc2));
  const Scalar eps = Scalar(hyper.epsilon);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    const auto g = grads[k]->array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    params[k]->array() -= step * m / (v.sqrt() * inv_sqrt_bc2 + eps);
  }
}

DatasetSplit split_dataset(std::span<const CellId> cells, double ratio, std::uint64_t seed) {
  const std::size_t n = cells.size();
  if (n < 2)
    throw ConfigError(kModule, "a split needs at least 2 cells");
  if (!(ratio > 0 && ratio < 1))
    throw ConfigError(kModule, "split ratio must lie in (0,1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 gen(seed);
  shuffle_in_place(order, gen);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(ratio * double(n))), 1, n - 1);
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test_idx(order.begin() + n_train, order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  DatasetSplit s;
  for (auto i : train_idx)
    s.train.push_back(cells[i]);
  for (auto i : test_idx)
    s.test.push_back(cells[i]);
  return s;
}

InMemorySource::InMemorySource(std::span<const WeatherSeries> weather,
                               std::span<const YieldSeries> yields) {
  const AlignmentReport report = validate_alignment(weather, yields);
  if (!report.aligned)
    throw AlignmentError(kModule, "weather and yield tables are not aligned: " + report.summary());
  for (const auto& w : weather)
    weather_.push_back(&w);
  for (const auto& y : yields)
    yields_.push_back(&y);
  auto by_id = [](const auto* a, const auto* b) { return a->cell.id < b->cell.id; };
  std::sort(weather_.begin(), weather_.end(), by_id);
  std::sort(yields_.begin(), yields_.end(), by_id);
}

std::vector<CellId> InMemorySource::cells() const {
  std::vector<CellId> out;
  for (const auto* w : weather_)
    out.push_back(w->cell);
  return out;
}

const WeatherSeries& InMemorySource::weather(const std::string& cell_id, Purpose) const {
  auto it = std::lower_bound(weather_.begin(), weather_.end(), cell_id,
                             [](const WeatherSeries* w, const std::string& id) { return w->cell.id < id; });
  if (it == weather_.end() || (*it)->cell.id != cell_id)
    throw DomainError(kModule, "unknown cell '" + cell_id + "'");
  return **it;
}

const YieldSeries& InMemorySource::yields(const std::string& cell_id, Purpose) const {
  auto it = std::lower_bound(yields_.begin(), yields_.end(), cell_id,
                             [](const YieldSeries* y, const std::string& id) { return y->cell.id < id; });
  if (it == yields_.end() || (*it)->cell.id != cell_id)
    throw DomainError(kModule, "unknown cell '" + cell_id + "'");
  return **it;
}

SampleSet make_samples(const TrainingSource& source, std::span<const CellId> cells,
                       Purpose purpose, const FeatureSpec& spec, const Scaler& scaler) {
  SampleSet set;
  std::vector<Eigen::VectorXd> targets;
  for (const auto& cell : cells) {
    const WeatherSeries& w = source.weather(cell.id, purpose);
    const YieldSeries& y = source.yields(cell.id, purpose);
    for (int k = 0; k < w.n_years(); ++k) {
      set.inputs.push_back(prepare_input<float>(w, k, spec, scaler));
      targets.push_back(scale_target(
          y.twso.segment(static_cast<Eigen::Index>(k) * kDaysPerYear, kDaysPerYear), scaler));
      set.cell_ids.push_back(cell.id);
      set.years.push_back(w.start_year + k);
    }
  }
  set.targets.resize(kDaysPerYear, static_cast<Eigen::Index>(targets.size()));
  for (std::size_t j = 0; j < targets.size(); ++j)
    set.targets.col(static_cast<Eigen::Index>(j)) = targets[j].cast<float>();
  return set;
}

MatrixX<float> predict_scaled(const NestedModel<float>& model,
                              std::span<const BatchedSequence<float>> inputs, int block) {
  MatrixX<float> out(inputs.empty() ? 0 : inputs.front().n_days,
                     static_cast<Eigen::Index>(inputs.size()));
  block = std::max(1, block);
  for (std::size_t start = 0; start < inputs.size(); start += static_cast<std::size_t>(block)) {
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(block), inputs.size() - start);
    const auto r = forward(model, inputs.subspan(start, count), Mode::infer);
    out.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) = r.predictions;
  }
  return out;
}

YieldSeries predict_series(const NestedModel<float>& model, const WeatherSeries& weather) {
  YieldSeries y;
  y.cell = weather.cell;
  y.start_year = weather.start_year;
  y.twso.resize(weather.n_days());
  std::vector<BatchedSequence<float>> inputs;
  for (int k = 0; k < weather.n_years(); ++k)
    inputs.push_back(prepare_input<float>(weather, k, model.spec, model.scaler));
  const MatrixX<float> pred = predict_scaled(model, inputs);
  for (int k = 0; k < weather.n_years(); ++k)
    y.twso.segment(static_cast<Eigen::Index>(k) * kDaysPerYear, kDaysPerYear) =
        unscale_target(pred.col(k).cast<double>(), model.scaler);
  return y;
}

double climatology_baseline_loss(const MatrixX<float>& train_targets,
                                 const MatrixX<float>& eval_targets, double delta) {
  const Eigen::VectorXd mean = train_targets.cast<double>().rowwise().mean();
  const MatrixX<float> baseline = mean.cast<float>().replicate(1, eval_targets.cols());
  return huber_loss<float>(baseline, eval_targets, delta).loss;
}

TrainResult train(const TrainingSource& source, const std::string& crop_tag,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  (void)crop_tag;
  using Clock = std::chrono::steady_clock;

  TrainResult result;
  const std::vector<CellId> cells = source.cells();
  result.split = split_dataset(cells, cfg.split_ratio, cfg.seed);

  // Scaler statistics come from training cells only.
  std::vector<FeatureSeries> raw_train;
  std::vector<YieldSeries> raw_targets;
  for (const auto& cell : result.split.train) {
    const WeatherSeries& w = source.weather(cell.id, Purpose::fit);
    for (int k = 0; k < w.n_years(); ++k)
      raw_train.push_back(build_features(w, k, cfg.features));
    raw_targets.push_back(source.yields(cell.id, Purpose::fit));
  }
  const Scaler scaler = fit_scaler(raw_train, raw_targets);
  raw_train.clear();

  const SampleSet train_set =
      make_samples(source, result.split.train, Purpose::fit, cfg.features, scaler);
  const SampleSet val_set =
      make_samples(source, result.split.test, Purpose::validate, cfg.features, scaler);

  NestedModel<float> model = init_model<float>(cfg.features, cfg.hidden, cfg.seed, cfg.dropout_rate);
  model.scaler = scaler;
  AdamState<float> adam;
  const AdamHyper hyper = AdamHyper::from(cfg);

  std::seed_seq shuffle_seq{static_cast<std::uint32_t>(cfg.seed),
                            static_cast<std::uint32_t>(cfg.seed >> 32), 0x5u};
  std::seed_seq dropout_seq{static_cast<std::uint32_t>(cfg.seed),
                            static_cast<std::uint32_t>(cfg.seed >> 32), 0xD0u};
  std::mt19937_64 shuffle_rng(shuffle_seq);
  std::mt19937_64 dropout_rng(dropout_seq);

  const std::size_t n_train = train_set.inputs.size();
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  double best_val = std::numeric_limits<double>::infinity();
  NestedParams<float> best_params = model.params;
  int since_best = 0;
  std::vector<BatchedSequence<float>> block;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    shuffle_in_place(order, shuffle_rng);
    double loss_sum = 0.0;
    Eigen::Index loss_count = 0;
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t count =
          std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatch_size), n_train - start);
      block.clear();
      MatrixX<float> target(kDaysPerYear, static_cast<Eigen::Index>(count));
      for (std::size_t j = 0; j < count; ++j) {
        block.push_back(train_set.inputs[order[start + j]]);
        target.col(static_cast<Eigen::Index>(j)) =
            train_set.targets.col(static_cast<Eigen::Index>(order[start + j]));
      }
      auto fwd = forward<float>(model, block, Mode::train, &dropout_rng);
      const auto loss = huber_loss<float>(fwd.predictions, target, cfg.huber_delta);
      const NestedParams<float> grad = backward(model, fwd.cache, loss.d_pred);
      adam_step(model.params, grad, adam, hyper);
      loss_sum += loss.loss * double(loss.n_valid);
      loss_count += loss.n_valid;
    }
    const double train_loss = loss_sum / double(loss_count);
    const MatrixX<float> val_pred = predict_scaled(model, val_set.inputs, cfg.minibatch_size);
    const double val_loss = huber_loss<float>(val_pred, val_set.targets, cfg.huber_delta).loss;

    result.history.train_loss.push_back(train_loss);
    result.history.val_loss.push_back(val_loss);
    result.history.seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    if (on_epoch)
      on_epoch(epoch, train_loss, val_loss);

    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = model.params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  model.params = std::move(best_params);
  result.model = std::move(model);
  return result;
}

TrainResult train(std::span<const WeatherSeries> weather, std::span<const YieldSeries> yields,
                  const std::string& crop_tag, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  const InMemorySource source(weather, yields);
  return train(source, crop_tag, cfg, on_epoch);
}

#define SECS_INSTANTIATE_TRAINING(T)                                                          \
  template HuberResult<T> huber_loss<T>(const MatrixX<T>&, const MatrixX<T>&,                 \
                                        const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>&, \
                                        double);                                              \
  template struct AdamState<T>;                                                               \
  template void adam_step<T>(std::span<MatrixX<T>* const>, std::span<const MatrixX<T>* const>, \
                             AdamState<T>&, const AdamHyper&);

SECS_INSTANTIATE_TRAINING(float)
SECS_INSTANTIATE_TRAINING(double)

#undef SECS_INSTANTIATE_TRAINING

} // namespace secs
