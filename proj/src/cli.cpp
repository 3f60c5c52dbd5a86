#include "secs/cli.hpp"

#include "secs/aoc.hpp"
#include "secs/checkpoint.hpp"
#include "secs/datamodel.hpp"
#include "secs/io.hpp"
#include "secs/json_convert.hpp"
#include "secs/metrics.hpp"
#include "secs/stats.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <iostream>
#include <sstream>
#include <thread>
#include <time.h>

namespace secs::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Kind { text, integer, number, flag };

struct FlagSpec {
  const char* name;
  Kind kind;
  bool required;
  const char* help;
};

struct VerbSpec {
  const char* name;
  const char* summary;
  std::vector<FlagSpec> flags;
};

const std::vector<VerbSpec>& verb_specs() {
  static const std::vector<VerbSpec> specs = {
      {"gen-data",
       "Generate a synthetic daily weather table",
       {{"out", Kind::text, true, "Weather CSV to write"},
        {"cells", Kind::integer, false, "Number of grid cells"},
        {"years", Kind::integer, false, "Number of years per cell"},
        {"start-year", Kind::integer, false, "First calendar year"},
        {"seed", Kind::integer, false, "Random seed"},
        {"warming", Kind::number, false, "Scenario temperature offset (degC)"},
        {"precip-factor", Kind::number, false, "Scenario precipitation multiplier"}}},
      {"simulate",
       "Run the reference crop simulator on a weather table",
       {{"weather", Kind::text, true, "Weather CSV"},
        {"out", Kind::text, true, "Yield CSV to write"},
        {"crop", Kind::text, false, "Crop preset (maizelike, barleylike)"}}},
      {"train",
       "Train the emulator and write a checkpoint",
       {{"weather", Kind::text, true, "Weather CSV"},
        {"yields", Kind::text, true, "Simulated yield CSV aligned with the weather"},
        {"out", Kind::text, true, "Checkpoint JSON to write"},
        {"crop", Kind::text, false, "Crop tag recorded in the checkpoint"},
        {"epochs", Kind::integer, false, "Maximum number of epochs"},
        {"minibatch", Kind::integer, false, "Cell-years per optimizer step"},
        {"lr", Kind::number, false, "Adam learning rate"},
        {"hidden", Kind::integer, false, "Hidden units of both recurrent layers"},
        {"dropout", Kind::number, false, "Dropout rate on the outer states"},
        {"split", Kind::number, false, "Fraction of cells used for fitting"},
        {"patience", Kind::integer, false, "Early-stopping patience in epochs"},
        {"seed", Kind::integer, false, "Random seed"}}},
      {"predict",
       "Emulate daily TWSO for every cell-year of a weather table",
       {{"checkpoint", Kind::text, true, "Checkpoint JSON"},
        {"weather", Kind::text, true, "Weather CSV"},
        {"out", Kind::text, true, "Prediction CSV to write"},
        {"jobs", Kind::integer, false, "Worker threads"}}},
      {"evaluate",
       "Compare predicted and simulated yield curves",
       {{"predictions", Kind::text, true, "Prediction CSV"},
        {"reference", Kind::text, true, "Simulated yield CSV"},
        {"out", Kind::text, true, "Per cell-year metrics CSV to write"},
        {"summary", Kind::text, false, "Summary JSON to write (default <out>.summary.json)"},
        {"checkpoint", Kind::text, false, "Restrict to the held-out cells of this checkpoint"},
        {"jobs", Kind::integer, false, "Worker threads"}}},
      {"biasadjust",
       "Quantile delta mapping of projected weather",
       {{"reference", Kind::text, true, "Observed weather CSV of the calibration period"},
        {"historical", Kind::text, true, "Model weather CSV of the calibration period"},
        {"projected", Kind::text, true, "Model weather CSV to adjust"},
        {"out", Kind::text, true, "Adjusted weather CSV to write"},
        {"tmax-kind", Kind::text, false, "additive or multiplicative"},
        {"tmin-kind", Kind::text, false, "additive or multiplicative"},
        {"precip-kind", Kind::text, false, "additive or multiplicative"},
        {"quantiles", Kind::integer, false, "Number of quantiles in each map"},
        {"monthly", Kind::flag, false, "Fit one map per calendar month"},
        {"observed", Kind::text, false, "Observed weather spliced in before --cut-doy"},
        {"cut-doy", Kind::integer, false, "First forecast day of year when splicing"}}},
      {"aoc",
       "Map Areas of Concern from yield anomalies",
       {{"mode", Kind::text, false, "probabilistic (default) or decadal"},
        {"reference", Kind::text, true, "Yield CSV of the reference period, members optional"},
        {"forecast", Kind::text, false, "Ensemble yield CSV (probabilistic mode)"},
        {"year", Kind::integer, false, "Forecast year (default: last year covered by every member)"},
        {"projection", Kind::text, false, "Yield CSV, members optional (decadal mode)"},
        {"window", Kind::integer, false, "Decadal window length in years"},
        {"threshold", Kind::number, false, "Deterministic AoC reduction in percent"},
        {"grid", Kind::text, false, "Weather CSV supplying cell coordinates"},
        {"out", Kind::text, true, "AoC CSV to write"},
        {"jobs", Kind::integer, false, "Worker threads"}}},
      {"bench",
       "Measure single-thread inference CPU time per cell-year",
       {{"checkpoint", Kind::text, false, "Checkpoint JSON (default: freshly initialized model)"},
        {"cells", Kind::integer, false, "Synthetic cells to time"},
        {"years", Kind::integer, false, "Synthetic years per cell"},
        {"warmup", Kind::integer, false, "Untimed cell-years run first"},
        {"hidden", Kind::integer, false, "Hidden units of the fresh model"},
        {"seed", Kind::integer, false, "Random seed"},
        {"out", Kind::text, false, "Result JSON to write (always printed)"}}},
  };
  return specs;
}

const VerbSpec* find_verb(const std::string& name) {
  for (const auto& v : verb_specs())
    if (name == v.name)
      return &v;
  return nullptr;
}

std::string verb_list() {
  std::string s;
  for (const auto& v : verb_specs())
    s += (s.empty() ? "" : ", ") + std::string(v.name);
  return s;
}

struct ParserBundle {
  CLI::App app{"Daily crop yield emulation pipeline", "secs"};
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::map<std::string, bool>> switches;
  std::map<std::string, std::string> config;
  std::map<std::string, CLI::App*> subs;

  ParserBundle() {
    app.require_subcommand(1, 1);
    for (const auto& v : verb_specs()) {
      CLI::App* sub = app.add_subcommand(v.name, v.summary);
      subs[v.name] = sub;
      auto& vals = values[v.name];
      auto& sw = switches[v.name];
      for (const auto& f : v.flags) {
        const std::string flag = std::string("--") + f.name;
        if (f.kind == Kind::flag) {
          sub->add_flag(flag, sw[f.name], f.help);
          continue;
        }
        CLI::Option* opt = sub->add_option(flag, vals[f.name], f.help);
        if (f.kind == Kind::integer)
          opt->check(CLI::TypeValidator<long long>(""))->type_name("INT");
        else if (f.kind == Kind::number)
          opt->check(CLI::TypeValidator<double>(""))->type_name("NUMBER");
        else
          opt->type_name("TEXT");
        if (f.required)
          opt->required();
      }
      sub->add_option("--config", config[v.name], "Run configuration JSON")->type_name("PATH");
    }
    app.footer("Run 'secs <verb> --help' for the flags of a verb.");
  }
};

std::optional<long long> int_flag(const Command& c, const std::string& name) {
  auto it = c.options.find(name);
  if (it == c.options.end())
    return std::nullopt;
  long long v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw UsageError("--" + name + " expects an integer, got '" + s + "'");
  return v;
}

std::optional<double> number_flag(const Command& c, const std::string& name) {
  auto it = c.options.find(name);
  if (it == c.options.end())
    return std::nullopt;
  try {
    return parse_number(it->second, "--" + name);
  } catch (const Error&) {
    throw UsageError("--" + name + " expects a number, got '" + it->second + "'");
  }
}

std::optional<std::string> text_flag(const Command& c, const std::string& name) {
  auto it = c.options.find(name);
  if (it == c.options.end())
    return std::nullopt;
  return it->second;
}

std::string required_text(const Command& c, const std::string& name) {
  auto v = text_flag(c, name);
  if (!v)
    throw UsageError("--" + name + " is required");
  return *v;
}

int jobs_flag(const Command& c) {
  const long long jobs = int_flag(c, "jobs").value_or(1);
  if (jobs < 1 || jobs > 1024)
    throw UsageError("--jobs must lie in [1, 1024]");
  return static_cast<int>(jobs);
}

/// Runs fn(i) for i in [0, n) on `jobs` threads. Errors are rethrown for the
/// lowest failing index so the reported failure does not depend on timing.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t)
      pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Per-invocation bookkeeping for manifest sidecars.
class RunContext {
public:
  RunContext(const Command& command, const RunConfig& config)
      : command_(command), config_(config), started_(std::chrono::system_clock::now()),
        t0_(std::chrono::steady_clock::now()) {}

  void set_seeds(json seeds) { seeds_ = std::move(seeds); }

  /// Writes `path` atomically, then its `<path>.manifest.json` sidecar.
  void write_output(const fs::path& path, const std::function<void(std::ostream&)>& writer,
                    const json& result = nullptr) const {
    write_file_atomic(path, writer);
    json manifest;
    manifest["output"] = path.string();
    manifest["verb"] = command_.verb;
    manifest["options"] = command_.options;
    manifest["config_path"] = command_.config_path ? json(command_.config_path->string()) : json(nullptr);
    manifest["config"] = to_json(config_);
    manifest["seeds"] = seeds_;
    json inputs = json::object();
    for (const char* key : {"weather", "yields", "checkpoint", "predictions", "reference",
                            "historical", "projected", "observed", "forecast", "projection", "grid"}) {
      auto it = command_.options.find(key);
      if (it == command_.options.end())
        continue;
      std::error_code ec;
      const auto size = fs::file_size(it->second, ec);
      inputs[key] = {{"path", it->second}, {"bytes", ec ? json(nullptr) : json(size)}};
    }
    manifest["inputs"] = std::move(inputs);
    manifest["versions"] = {{"secs", kVersion},
                            {"checkpoint_format", kCheckpointFormatVersion},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                          std::to_string(EIGEN_MINOR_VERSION)}};
    manifest["started_at"] = utc_timestamp(started_);
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    if (!result.is_null())
      manifest["result"] = result;
    const std::string text = manifest.dump(2) + "\n";
    write_file_atomic(fs::path(path.string() + ".manifest.json"),
                      [&](std::ostream& out) { out << text; });
  }

private:
  const Command& command_;
  const RunConfig& config_;
  json seeds_ = json::object();
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point t0_;
};

void require_int_range(long long v, long long lo, long long hi, const std::string& flag) {
  if (v < lo || v > hi)
    throw UsageError("--" + flag + " must lie in [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
}

int to_int(std::optional<long long> v, int fallback, const std::string& flag) {
  if (!v)
    return fallback;
  require_int_range(*v, std::numeric_limits<int>::min(), std::numeric_limits<int>::max(), flag);
  return static_cast<int>(*v);
}

std::uint64_t to_seed(std::optional<long long> v, std::uint64_t fallback) {
  if (!v)
    return fallback;
  if (*v < 0)
    throw UsageError("--seed must be nonnegative");
  return static_cast<std::uint64_t>(*v);
}

template <typename T>
std::map<std::string, const T*> index_by_cell(const std::vector<T>& series) {
  std::map<std::string, const T*> out;
  for (const auto& s : series)
    out[s.cell.id] = &s;
  return out;
}

// ---------------------------------------------------------------- verbs

int run_gen_data(const Command& c, RunConfig& cfg, std::ostream& out) {
  auto& g = cfg.synthdata;
  g.n_cells = to_int(int_flag(c, "cells"), g.n_cells, "cells");
  g.n_years = to_int(int_flag(c, "years"), g.n_years, "years");
  g.start_year = to_int(int_flag(c, "start-year"), g.start_year, "start-year");
  g.seed = to_seed(int_flag(c, "seed"), g.seed);
  cfg.scenario.warming = number_flag(c, "warming").value_or(cfg.scenario.warming);
  cfg.scenario.precip_factor = number_flag(c, "precip-factor").value_or(cfg.scenario.precip_factor);
  cfg.validate();

  auto weather = generate_weather(g);
  if (cfg.scenario.warming != 0.0 || cfg.scenario.precip_factor != 1.0)
    for (auto& w : weather)
      w = apply_scenario(w, cfg.scenario);

  RunContext ctx(c, cfg);
  ctx.set_seeds({{"synthdata", g.seed}});
  const fs::path path = required_text(c, "out");
  ctx.write_output(path, [&](std::ostream& os) { write_weather_table(os, weather); },
                   {{"cells", weather.size()}, {"years", g.n_years}});
  out << "wrote " << weather.size() << " cells x " << g.n_years << " years to " << path.string()
      << "\n";
  return 0;
}

void apply_crop_flag(const Command& c, RunConfig& cfg) {
  if (auto crop = text_flag(c, "crop"))
    cfg.crop = crop_preset(*crop);
}

int run_simulate(const Command& c, RunConfig& cfg, std::ostream& out) {
  apply_crop_flag(c, cfg);
  cfg.validate();
  const auto weather = load_weather_table(required_text(c, "weather"));
  std::vector<YieldSeries> yields(weather.size());
  for (std::size_t i = 0; i < weather.size(); ++i)
    yields[i] = simulate_crop(weather[i], cfg.crop);

  RunContext ctx(c, cfg);
  const fs::path path = required_text(c, "out");
  ctx.write_output(path, [&](std::ostream& os) { write_yield_table(os, yields); },
                   {{"crop", cfg.crop.name}, {"cells", yields.size()}});
  out << "simulated " << cfg.crop.name << " for " << yields.size() << " cells into "
      << path.string() << "\n";
  return 0;
}

int run_train(const Command& c, RunConfig& cfg, std::ostream& out, std::ostream& err) {
  auto& t = cfg.training;
  t.epochs = to_int(int_flag(c, "epochs"), t.epochs, "epochs");
  t.minibatch_size = to_int(int_flag(c, "minibatch"), t.minibatch_size, "minibatch");
  t.learning_rate = number_flag(c, "lr").value_or(t.learning_rate);
  t.hidden = to_int(int_flag(c, "hidden"), t.hidden, "hidden");
  t.dropout_rate = number_flag(c, "dropout").value_or(t.dropout_rate);
  t.split_ratio = number_flag(c, "split").value_or(t.split_ratio);
  t.early_stop_patience = to_int(int_flag(c, "patience"), t.early_stop_patience, "patience");
  t.seed = to_seed(int_flag(c, "seed"), t.seed);
  const std::string crop_tag = text_flag(c, "crop").value_or(cfg.crop.name);
  cfg.validate();

  const auto weather = load_weather_table(required_text(c, "weather"));
  const auto yields = load_yield_table(required_text(c, "yields"));
  const auto result = train(weather, yields, crop_tag, t, [&](int epoch, double tl, double vl) {
    err << "epoch " << epoch + 1 << " train_loss " << format_number(tl) << " val_loss "
        << format_number(vl) << "\n";
  });

  CheckpointInfo info;
  info.crop = crop_tag;
  info.train = t;
  for (const auto& cell : result.split.train)
    info.train_cells.push_back(cell.id);
  for (const auto& cell : result.split.test)
    info.test_cells.push_back(cell.id);
  const std::string text = serialize_checkpoint(result.model, info);

  RunContext ctx(c, cfg);
  ctx.set_seeds({{"training", t.seed}});
  const fs::path path = required_text(c, "out");
  const auto& h = result.history;
  ctx.write_output(path, [&](std::ostream& os) { os << text; },
                   {{"crop", crop_tag},
                    {"epochs_completed", h.epochs_completed()},
                    {"best_epoch", h.best_epoch},
                    {"train_loss", h.train_loss},
                    {"val_loss", h.val_loss}});
  out << "trained " << h.epochs_completed() << " epochs (best " << h.best_epoch + 1
      << ", val_loss " << format_number(h.val_loss.at(h.best_epoch)) << "); checkpoint "
      << path.string() << "\n";
  return 0;
}

int run_predict(const Command& c, RunConfig& cfg, std::ostream& out) {
  const int jobs = jobs_flag(c);
  const auto cp = load_checkpoint(required_text(c, "checkpoint"));
  const auto weather = load_weather_table(required_text(c, "weather"));
  std::vector<YieldSeries> preds(weather.size());
  parallel_for(weather.size(), jobs,
               [&](std::size_t i) { preds[i] = predict_series(cp.model, weather[i]); });

  RunContext ctx(c, cfg);
  const fs::path path = required_text(c, "out");
  ctx.write_output(path, [&](std::ostream& os) { write_yield_table(os, preds); },
                   {{"crop", cp.info.crop}, {"cells", preds.size()}});
  out << "predicted " << preds.size() << " cells into " << path.string() << "\n";
  return 0;
}

struct EvalRow {
  int year = 0;
  double frechet = 0, hausdorff = 0, mae = 0, bias = 0, ndi = 0;
  double pred_total = 0, ref_total = 0;
};

json quantile_summary(std::vector<double> v) {
  if (v.empty())
    return nullptr;
  std::sort(v.begin(), v.end());
  json q = json::object();
  for (double p : {0.05, 0.25, 0.5, 0.75, 0.95})
    q[format_number(p)] = quantile_sorted(v, p);
  double mean = 0;
  for (double x : v)
    mean += x;
  return {{"n", v.size()}, {"mean", mean / double(v.size())}, {"quantiles", q}};
}

int run_evaluate(const Command& c, RunConfig& cfg, std::ostream& out) {
  const int jobs = jobs_flag(c);
  auto preds = load_yield_table(required_text(c, "predictions"), Monotonicity::relax);
  const auto refs = load_yield_table(required_text(c, "reference"));
  const auto ref_by_cell = index_by_cell(refs);
  if (auto cp_path = text_flag(c, "checkpoint")) {
    const auto cp = load_checkpoint(*cp_path);
    const std::set<std::string> keep(cp.info.test_cells.begin(), cp.info.test_cells.end());
    std::erase_if(preds, [&](const YieldSeries& p) { return !keep.count(p.cell.id); });
  }
  if (preds.empty())
    throw AlignmentError("cli", "no prediction cells left to evaluate");

  std::vector<std::vector<EvalRow>> rows(preds.size());
  parallel_for(preds.size(), jobs, [&](std::size_t i) {
    const auto& p = preds[i];
    auto it = ref_by_cell.find(p.cell.id);
    if (it == ref_by_cell.end())
      throw AlignmentError("cli", "cell '" + p.cell.id + "' has predictions but no reference yields");
    const YieldSeries& r = *it->second;
    const int first = std::max(p.start_year, r.start_year);
    const int last = std::min(p.end_year(), r.end_year());
    if (first > last)
      throw AlignmentError("cli", "cell '" + p.cell.id + "' shares no year between predictions and reference");
    for (int year = first; year <= last; ++year) {
      const Eigen::VectorXd a = p.twso.segment(Eigen::Index(year - p.start_year) * kDaysPerYear, kDaysPerYear);
      const Eigen::VectorXd b = r.twso.segment(Eigen::Index(year - r.start_year) * kDaysPerYear, kDaysPerYear);
      const auto [ca, cb] = normalize_curves(a, b);
      const auto es = error_stats(a, b);
      EvalRow row;
      row.year = year;
      row.frechet = discrete_frechet(ca, cb);
      row.hausdorff = hausdorff(ca, cb);
      row.mae = es.mae;
      row.bias = es.mean_bias;
      row.pred_total = a[kDaysPerYear - 1];
      row.ref_total = b[kDaysPerYear - 1];
      row.ndi = ndi(row.pred_total, row.ref_total);
      rows[i].push_back(row);
    }
  });

  std::vector<double> fr, ha, mae, bias, nd, pred_tot, ref_tot;
  json per_cell = json::object();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    Eigen::VectorXd pa(rows[i].size()), ra(rows[i].size());
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      const auto& r = rows[i][k];
      fr.push_back(r.frechet);
      ha.push_back(r.hausdorff);
      mae.push_back(r.mae);
      bias.push_back(r.bias);
      nd.push_back(r.ndi);
      pred_tot.push_back(r.pred_total);
      ref_tot.push_back(r.ref_total);
      pa[k] = r.pred_total;
      ra[k] = r.ref_total;
    }
    const auto es = error_stats(pa, ra);
    per_cell[preds[i].cell.id] = {{"season_mae", es.mae},
                                  {"season_bias", es.mean_bias},
                                  {"season_ndi", ndi(pa.mean(), ra.mean())}};
  }

  json overlap_value = nullptr;
  try {
    const Eigen::VectorXd grid = density_grid(pred_tot, ref_tot, 512);
    overlap_value = overlap(kde_density(pred_tot, grid), kde_density(ref_tot, grid));
  } catch (const Error&) {
    // degenerate spread in either sample; leave the coefficient null
  }
  json summary = {{"cell_years", fr.size()},
                  {"cells", preds.size()},
                  {"frechet", quantile_summary(fr)},
                  {"hausdorff", quantile_summary(ha)},
                  {"mae", quantile_summary(mae)},
                  {"bias", quantile_summary(bias)},
                  {"ndi", quantile_summary(nd)},
                  {"season_total_overlap", overlap_value},
                  {"per_cell", per_cell}};

  RunContext ctx(c, cfg);
  const fs::path path = required_text(c, "out");
  ctx.write_output(path, [&](std::ostream& os) {
    os << "cell_id,year,frechet,hausdorff,mae,bias,ndi\n";
    for (std::size_t i = 0; i < preds.size(); ++i)
      for (const auto& r : rows[i])
        os << preds[i].cell.id << ',' << r.year << ',' << format_number(r.frechet) << ','
           << format_number(r.hausdorff) << ',' << format_number(r.mae) << ','
           << format_number(r.bias) << ',' << format_number(r.ndi) << '\n';
  });
  const fs::path summary_path = text_flag(c, "summary").value_or(path.string() + ".summary.json");
  const std::string summary_text = summary.dump(2) + "\n";
  ctx.write_output(summary_path, [&](std::ostream& os) { os << summary_text; });
  out << "evaluated " << fr.size() << " cell-years; median frechet "
      << format_number(summary["frechet"]["quantiles"]["0.5"].get<double>()) << ", median hausdorff "
      << format_number(summary["hausdorff"]["quantiles"]["0.5"].get<double>()) << "\n";
  return 0;
}

int run_biasadjust(const Command& c, RunConfig& cfg, std::ostream& out) {
  auto& q = cfg.qdm;
  if (auto k = text_flag(c, "tmax-kind"))
    q.tmax_kind = parse_qdm_kind(*k);
  if (auto k = text_flag(c, "tmin-kind"))
    q.tmin_kind = parse_qdm_kind(*k);
  if (auto k = text_flag(c, "precip-kind"))
    q.precip_kind = parse_qdm_kind(*k);
  q.n_quantiles = to_int(int_flag(c, "quantiles"), q.n_quantiles, "quantiles");
  if (c.has("monthly"))
    q.monthly = true;
  const int cut_doy = to_int(int_flag(c, "cut-doy"), 152, "cut-doy");
  if (c.has("cut-doy") && !c.has("observed"))
    throw UsageError("--cut-doy requires --observed");
  cfg.validate();

  const auto ref = load_weather_table(required_text(c, "reference"));
  const auto hist = load_weather_table(required_text(c, "historical"));
  const auto proj = load_weather_table(required_text(c, "projected"));
  const auto ref_by = index_by_cell(ref);
  const auto hist_by = index_by_cell(hist);
  std::vector<WeatherSeries> obs;
  if (auto o = text_flag(c, "observed"))
    obs = load_weather_table(*o);
  const auto obs_by = index_by_cell(obs);

  std::vector<WeatherSeries> adjusted;
  adjusted.reserve(proj.size());
  for (const auto& p : proj) {
    auto r = ref_by.find(p.cell.id);
    auto h = hist_by.find(p.cell.id);
    if (r == ref_by.end() || h == hist_by.end())
      throw AlignmentError("cli", "projected cell '" + p.cell.id +
                                      "' lacks reference or historical weather");
    WeatherSeries a = bias_adjust(*r->second, *h->second, p, q);
    if (c.has("observed")) {
      auto o = obs_by.find(p.cell.id);
      if (o == obs_by.end())
        throw AlignmentError("cli", "projected cell '" + p.cell.id + "' lacks observed weather");
      a = splice_series(*o->second, a, cut_doy);
    }
    adjusted.push_back(std::move(a));
  }

  RunContext ctx(c, cfg);
  const fs::path path = required_text(c, "out");
  ctx.write_output(path, [&](std::ostream& os) { write_weather_table(os, adjusted); });
  out << "bias-adjusted " << adjusted.size() << " cells into " << path.string() << "\n";
  return 0;
}

/// End-of-year yields of every member, grouped by cell.
std::map<std::string, std::vector<const EnsembleYield*>> group_members(const std::vector<EnsembleYield>& e) {
  std::map<std::string, std::vector<const EnsembleYield*>> out;
  for (const auto& m : e)
    out[m.series.cell.id].push_back(&m);
  return out;
}

std::string coordinate(double v) { return std::isfinite(v) ? format_number(v) : std::string(); }

int run_aoc(const Command& c, RunConfig& cfg, std::ostream& out) {
  const int jobs = jobs_flag(c);
  const std::string mode = text_flag(c, "mode").value_or("probabilistic");
  if (mode != "probabilistic" && mode != "decadal")
    throw UsageError("--mode must be 'probabilistic' or 'decadal', got '" + mode + "'");
  cfg.aoc.window = to_int(int_flag(c, "window"), cfg.aoc.window, "window");
  cfg.aoc.threshold_pct = number_flag(c, "threshold").value_or(cfg.aoc.threshold_pct);
  cfg.validate();

  const auto reference = load_ensemble_table(required_text(c, "reference"), Monotonicity::relax);
  const auto ref_groups = group_members(reference);
  std::map<std::string, std::pair<double, double>> coords;
  if (auto g = text_flag(c, "grid"))
    for (const auto& w : load_weather_table(*g))
      coords[w.cell.id] = {w.cell.lat, w.cell.lon};

  auto reference_yields = [&](const std::string& cell) {
    auto it = ref_groups.find(cell);
    if (it == ref_groups.end())
      throw AlignmentError("cli", "cell '" + cell + "' has no reference yields");
    std::vector<double> v;
    for (const auto* m : it->second) {
      const Eigen::VectorXd e = m->series.end_of_year();
      v.insert(v.end(), e.data(), e.data() + e.size());
    }
    return v;
  };
  auto with_cell = [](const std::string& cell, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw DomainError("aoc", "cell '" + cell + "': " + e.what());
    }
  };

  RunContext ctx(c, cfg);
  const fs::path path = required_text(c, "out");
  if (mode == "probabilistic") {
    if (c.has("projection") || c.has("window"))
      throw UsageError("--projection and --window apply to --mode decadal only");
    if (!c.has("forecast"))
      throw UsageError("--forecast is required for --mode probabilistic");
    const auto forecast = load_ensemble_table(required_text(c, "forecast"), Monotonicity::relax);
    const auto fc_groups = group_members(forecast);
    int year = 0;
    if (auto y = int_flag(c, "year")) {
      year = to_int(y, 0, "year");
    } else {
      year = std::numeric_limits<int>::max();
      for (const auto& m : forecast)
        year = std::min(year, m.series.end_year());
    }
    std::vector<std::string> cells;
    for (const auto& [cell, _] : fc_groups)
      cells.push_back(cell);
    std::vector<ProbabilisticAoc> results(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
      results[i] = with_cell(cells[i], [&] {
        std::vector<double> members;
        for (const auto* m : fc_groups.at(cells[i])) {
          const auto& s = m->series;
          if (year < s.start_year || year > s.end_year())
            throw AlignmentError("cli", "member " + std::to_string(m->member_id) +
                                            " does not cover year " + std::to_string(year));
          members.push_back(s.twso[Eigen::Index(year - s.start_year + 1) * kDaysPerYear - 1]);
        }
        return probabilistic_aoc(reference_yields(cells[i]), members);
      });
    });
    ctx.write_output(path, [&](std::ostream& os) {
      os << "cell_id,lat,lon,p_below,p_normal,p_above,category,is_aoc\n";
      for (std::size_t i = 0; i < cells.size(); ++i) {
        auto it = coords.find(cells[i]);
        const auto& r = results[i];
        os << cells[i] << ',' << (it != coords.end() ? coordinate(it->second.first) : "") << ','
           << (it != coords.end() ? coordinate(it->second.second) : "") << ','
           << format_number(r.probs.p_below) << ',' << format_number(r.probs.p_normal) << ','
           << format_number(r.probs.p_above) << ',' << to_string(r.decision.category) << ','
           << (r.decision.is_aoc ? 1 : 0) << '\n';
      }
    }, {{"mode", mode}, {"year", year}});
    const auto n_aoc = std::count_if(results.begin(), results.end(),
                                     [](const ProbabilisticAoc& r) { return r.decision.is_aoc; });
    out << "classified " << cells.size() << " cells for " << year << "; " << n_aoc
        << " areas of concern\n";
    return 0;
  }

  if (c.has("forecast") || c.has("year"))
    throw UsageError("--forecast and --year apply to --mode probabilistic only");
  if (!c.has("projection"))
    throw UsageError("--projection is required for --mode decadal");
  const auto projection = load_ensemble_table(required_text(c, "projection"), Monotonicity::relax);
  const auto pr_groups = group_members(projection);
  std::vector<std::string> cells;
  for (const auto& [cell, _] : pr_groups)
    cells.push_back(cell);
  std::vector<std::vector<AocWindow>> results(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    results[i] = with_cell(cells[i], [&] {
      const auto& members = pr_groups.at(cells[i]);
      const auto& first = members.front()->series;
      Eigen::VectorXd yearly = Eigen::VectorXd::Zero(first.n_years());
      for (const auto* m : members) {
        if (m->series.start_year != first.start_year || m->series.n_years() != first.n_years())
          throw AlignmentError("cli", "projection members cover different years");
        yearly += m->series.end_of_year();
      }
      yearly /= double(members.size());
      const auto ref = reference_yields(cells[i]);
      double ref_mean = 0;
      for (double v : ref)
        ref_mean += v;
      ref_mean /= double(ref.size());
      return decadal_aoc(yearly, first.start_year, ref_mean, cfg.aoc.window, cfg.aoc.threshold_pct);
    });
  });
  ctx.write_output(path, [&](std::ostream& os) {
    os << "cell_id,window_start,window_end,is_aoc\n";
    for (std::size_t i = 0; i < cells.size(); ++i)
      for (const auto& w : results[i])
        os << cells[i] << ',' << w.start_year << ',' << w.end_year << ',' << (w.is_aoc ? 1 : 0) << '\n';
  }, {{"mode", mode}});
  out << "wrote decadal areas of concern for " << cells.size() << " cells into " << path.string()
      << "\n";
  return 0;
}

double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return double(ts.tv_sec) + 1e-9 * double(ts.tv_nsec);
}

int run_bench(const Command& c, RunConfig& cfg, std::ostream& out) {
  const int cells = to_int(int_flag(c, "cells"), 100, "cells");
  const int years = to_int(int_flag(c, "years"), 1, "years");
  const int warmup = to_int(int_flag(c, "warmup"), 10, "warmup");
  const int hidden = to_int(int_flag(c, "hidden"), cfg.training.hidden, "hidden");
  const std::uint64_t seed = to_seed(int_flag(c, "seed"), cfg.training.seed);
  require_int_range(cells, 1, 1000000, "cells");
  require_int_range(years, 1, 1000, "years");
  require_int_range(warmup, 0, 1000000, "warmup");
  if (static_cast<long long>(cells) * years < 100)
    throw UsageError("bench needs at least 100 timed cell-years (--cells x --years)");

  NestedModel<float> model;
  if (auto cp = text_flag(c, "checkpoint"))
    model = load_checkpoint(*cp).model;
  else
    model = init_model<float>(cfg.training.features, hidden, seed, cfg.training.dropout_rate);

  WeatherGenConfig g = cfg.synthdata;
  g.n_cells = cells;
  g.n_years = years;
  g.seed = seed;
  g.validate();
  const auto weather = generate_weather(g);

  volatile float sink = 0.0f;
  auto one = [&](const WeatherSeries& w, int y) {
    const auto input = prepare_input<float>(w, y, model.spec, model.scaler);
    const auto res = forward(model, input, Mode::infer);
    sink = sink + res.predictions(kDaysPerYear - 1, 0);
  };
  for (int k = 0; k < warmup; ++k)
    one(weather[std::size_t(k % cells)], (k / cells) % years);

  std::vector<double> seconds;
  seconds.reserve(std::size_t(cells) * std::size_t(years));
  for (const auto& w : weather)
    for (int y = 0; y < years; ++y) {
      const double t0 = thread_cpu_seconds();
      one(w, y);
      seconds.push_back(thread_cpu_seconds() - t0);
    }
  std::vector<double> sorted = seconds;
  std::sort(sorted.begin(), sorted.end());
  double total = 0;
  for (double s : seconds)
    total += s;
  const json result = {{"median_seconds_per_cell_year", quantile_sorted(sorted, 0.5)},
                       {"mean_seconds_per_cell_year", total / double(seconds.size())},
                       {"p90_seconds_per_cell_year", quantile_sorted(sorted, 0.9)},
                       {"cell_years", seconds.size()},
                       {"warmup_cell_years", warmup},
                       {"hidden", model.hidden_dim()},
                       {"n_features", model.n_features()},
                       {"clock", "thread_cpu_time"}};
  const std::string text = result.dump(2) + "\n";
  if (auto o = text_flag(c, "out")) {
    RunContext ctx(c, cfg);
    ctx.set_seeds({{"bench", seed}});
    ctx.write_output(*o, [&](std::ostream& os) { os << text; });
  }
  out << text;
  return 0;
}

} // namespace

const std::vector<std::string>& verbs() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& s : verb_specs())
      v.emplace_back(s.name);
    return v;
  }();
  return names;
}

std::string usage_text() {
  ParserBundle p;
  std::string text = p.app.help();
  for (const auto& v : verb_specs())
    text += "\n" + p.subs.at(v.name)->help("secs");
  return text;
}

Command parse_cli(const std::vector<std::string>& args) {
  if (args.empty())
    throw UsageError("missing verb; expected one of: " + verb_list());
  const bool wants_help = std::any_of(args.begin(), args.end(),
                                      [](const std::string& a) { return a == "--help" || a == "-h"; });
  const VerbSpec* verb = find_verb(args.front());
  if (wants_help) {
    ParserBundle p;
    throw HelpRequest{verb ? p.subs.at(verb->name)->help("secs") : p.app.help()};
  }
  if (!verb)
    throw UsageError("unknown verb '" + args.front() + "'; expected one of: " + verb_list());

  ParserBundle p;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    p.app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(verb->name) + ": " + e.what());
  }
  Command cmd;
  cmd.verb = verb->name;
  CLI::App* sub = p.subs.at(verb->name);
  for (const auto& f : verb->flags) {
    if (sub->get_option(std::string("--") + f.name)->count() == 0)
      continue;
    cmd.options[f.name] = f.kind == Kind::flag ? "true" : p.values[verb->name][f.name];
  }
  if (sub->get_option("--config")->count() > 0)
    cmd.config_path = p.config[verb->name];
  return cmd;
}

int run(const Command& command, std::ostream& out, std::ostream& err) {
  try {
    RunConfig cfg = load_run_config(command.config_path, std::getenv("SECS_SEED"));
    if (command.verb == "gen-data")
      return run_gen_data(command, cfg, out);
    if (command.verb == "simulate")
      return run_simulate(command, cfg, out);
    if (command.verb == "train")
      return run_train(command, cfg, out, err);
    if (command.verb == "predict")
      return run_predict(command, cfg, out);
    if (command.verb == "evaluate")
      return run_evaluate(command, cfg, out);
    if (command.verb == "biasadjust")
      return run_biasadjust(command, cfg, out);
    if (command.verb == "aoc")
      return run_aoc(command, cfg, out);
    if (command.verb == "bench")
      return run_bench(command, cfg, out);
    throw UsageError("unknown verb '" + command.verb + "'");
  } catch (const UsageError& e) {
    err << "secs: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "secs: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "secs: " << e.what() << "\n";
    return 1;
  }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Command cmd;
  try {
    cmd = parse_cli(args);
  } catch (const HelpRequest& h) {
    out << h.text;
    return 0;
  } catch (const UsageError& e) {
    err << "secs: " << e.what() << "\nRun 'secs --help' for usage.\n";
    return 2;
  }
  return run(cmd, out, err);
}

} // namespace secs::cli
