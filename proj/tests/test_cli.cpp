#include "secs/checkpoint.hpp"
#include "secs/cli.hpp"
#include "secs/datamodel.hpp"
#include "secs/io.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace secs;
using namespace secs::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int status = 0;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.status = main_entry(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

std::string weather_text(std::uint64_t seed, int cells, int years) {
  WeatherGenConfig g;
  g.n_cells = cells;
  g.n_years = years;
  g.seed = seed;
  std::ostringstream os;
  write_weather_table(os, generate_weather(g));
  return os.str();
}

/// Sets an environment variable for the lifetime of the guard.
class EnvGuard {
public:
  EnvGuard(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name))
      old_ = old;
    if (value)
      ::setenv(name, value, 1);
    else
      ::unsetenv(name);
  }
  ~EnvGuard() {
    if (old_)
      ::setenv(name_, old_->c_str(), 1);
    else
      ::unsetenv(name_);
  }

private:
  const char* name_;
  std::optional<std::string> old_;
};

/// gen-data -> simulate -> train -> predict in `dir`, tiny settings.
void pipeline(const testing::TempDir& dir, const std::string& jobs = "1") {
  const auto d = [&](const char* n) { return (dir / n).string(); };
  REQUIRE(call({"gen-data", "--out", d("w.csv"), "--cells", "5", "--years", "2", "--seed", "3"})
              .status == 0);
  REQUIRE(call({"simulate", "--weather", d("w.csv"), "--out", d("y.csv")}).status == 0);
  REQUIRE(call({"train", "--weather", d("w.csv"), "--yields", d("y.csv"), "--out", d("m.json"),
                "--epochs", "2", "--hidden", "6", "--minibatch", "4", "--seed", "11"})
              .status == 0);
  REQUIRE(call({"predict", "--checkpoint", d("m.json"), "--weather", d("w.csv"), "--out",
                d("p.csv"), "--jobs", jobs})
              .status == 0);
}

} // namespace

TEST_CASE("parse examples") {
  auto c = parse_cli({"bench", "--cells", "100", "--years", "1"});
  CHECK(c.verb == "bench");
  CHECK(c.options.at("cells") == "100");
  CHECK(c.options.at("years") == "1");
  CHECK_FALSE(c.config_path.has_value());

  c = parse_cli({"train", "--config", "c.json", "--seed", "7", "--weather", "w", "--yields", "y",
                 "--out", "m"});
  CHECK(c.verb == "train");
  CHECK(c.options.at("seed") == "7");
  REQUIRE(c.config_path.has_value());
  CHECK(*c.config_path == fs::path("c.json"));

  c = parse_cli({"biasadjust", "--reference", "r", "--historical", "h", "--projected", "p", "--out",
                 "o", "--monthly"});
  CHECK(c.options.at("monthly") == "true");
  CHECK(verbs().size() == 8);
}

TEST_CASE("parse errors are usage errors with exit 2") {
  CHECK_THROWS_AS(parse_cli({"frobnicate"}), UsageError);
  CHECK_THROWS_AS(parse_cli({}), UsageError);
  CHECK_THROWS_AS(parse_cli({"bench", "--bogus", "1"}), UsageError);
  CHECK_THROWS_AS(parse_cli({"bench", "--cells", "many"}), UsageError);
  CHECK_THROWS_AS(parse_cli({"bench", "extra"}), UsageError);
  try {
    parse_cli({"predict", "--weather", "w.csv", "--out", "p.csv"});
    FAIL("expected UsageError");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("checkpoint") != std::string::npos);
  }
  const auto o = call({"frobnicate"});
  CHECK(o.status == 2);
  CHECK(o.err.find("frobnicate") != std::string::npos);
  CHECK(call({"bench", "--cells", "x"}).status == 2);
}

TEST_CASE("help lists every flag of every verb") {
  for (const auto& v : verbs()) {
    try {
      parse_cli({v, "--help"});
      FAIL("expected HelpRequest");
    } catch (const HelpRequest& h) {
      CHECK(h.text.find("--config") != std::string::npos);
      CHECK(h.text.find(v) != std::string::npos);
    }
  }
  const auto o = call({"aoc", "--help"});
  CHECK(o.status == 0);
  for (const char* flag : {"--mode", "--reference", "--forecast", "--year", "--projection",
                           "--window", "--threshold", "--grid", "--out", "--jobs"})
    CHECK(o.out.find(flag) != std::string::npos);
  CHECK(call({"--help"}).out.find("gen-data") != std::string::npos);
}

TEST_CASE("usage text matches the golden file") {
  const fs::path golden = fs::path(SECS_SOURCE_DIR) / "tests" / "golden" / "usage.txt";
  const std::string text = usage_text();
  if (std::getenv("SECS_UPDATE_GOLDEN")) {
    write_text(golden, text);
    MESSAGE("rewrote " << golden.string());
  }
  REQUIRE(fs::exists(golden));
  CHECK(slurp(golden) == text);
}

TEST_CASE("seed precedence is flag over config over environment") {
  testing::TempDir dir("cli");
  const auto out = (dir / "w.csv").string();
  const auto cfg = (dir / "c.json").string();
  write_text(cfg, R"({"synthdata": {"seed": 5}})");
  const std::vector<std::string> base{"gen-data", "--out", out, "--cells", "2", "--years", "1"};

  EnvGuard env("SECS_SEED", "9");
  REQUIRE(call(base).status == 0);
  CHECK(slurp(out) == weather_text(9, 2, 1));

  auto with_cfg = base;
  with_cfg.insert(with_cfg.end(), {"--config", cfg});
  REQUIRE(call(with_cfg).status == 0);
  CHECK(slurp(out) == weather_text(5, 2, 1));

  auto with_flag = with_cfg;
  with_flag.insert(with_flag.end(), {"--seed", "7"});
  REQUIRE(call(with_flag).status == 0);
  CHECK(slurp(out) == weather_text(7, 2, 1));
}

TEST_CASE("config files are validated") {
  testing::TempDir dir("cli");
  const auto out = (dir / "w.csv").string();
  const auto cfg = (dir / "c.json").string();

  write_text(cfg, R"({"synthdata": {"seed": 5}, "plotting": {}})");
  auto o = call({"gen-data", "--out", out, "--config", cfg});
  CHECK(o.status == 2);
  CHECK(o.err.find("plotting") != std::string::npos);

  write_text(cfg, R"({"synthdata": {"sede": 5}})");
  CHECK(call({"gen-data", "--out", out, "--config", cfg}).status == 2);

  write_text(cfg, R"({"training": {"split_ratio": 1.5}})");
  CHECK(call({"gen-data", "--out", out, "--config", cfg}).status == 2);

  write_text(cfg, "{not json");
  CHECK(call({"gen-data", "--out", out, "--config", cfg}).status == 2);

  CHECK(call({"gen-data", "--out", out, "--config", (dir / "absent.json").string()}).status != 0);
  CHECK_FALSE(fs::exists(out));

  write_text(cfg, R"({"synthdata": {"n_cells": 3, "n_years": 1}, "aoc": {"window": 5}})");
  const auto rc = load_run_config(fs::path(cfg), nullptr);
  CHECK(rc.synthdata.n_cells == 3);
  CHECK(rc.aoc.window == 5);
  const auto back = to_json(rc);
  CHECK(back.contains("training"));
}

TEST_CASE("missing checkpoint exits 1 and names the path") {
  testing::TempDir dir("cli");
  const auto w = (dir / "w.csv").string();
  write_text(w, weather_text(1, 1, 1));
  const auto missing = (dir / "no_such_model.json").string();
  const auto o = call({"predict", "--checkpoint", missing, "--weather", w, "--out",
                       (dir / "p.csv").string()});
  CHECK(o.status == 1);
  CHECK(o.err.find("no_such_model.json") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "p.csv"));
}

TEST_CASE("bad input data exits 1") {
  testing::TempDir dir("cli");
  const auto w = (dir / "w.csv").string();
  write_text(w, "cell_id,lat,lon,date,tmax_c,tmin_c,precip_mm\na,1,2,2001-01-01,1,5,0\n");
  const auto o = call({"simulate", "--weather", w, "--out", (dir / "y.csv").string()});
  CHECK(o.status == 1);
  CHECK(o.err.find("2001-01-01") != std::string::npos);
}

TEST_CASE("end-to-end pipeline with manifests") {
  testing::TempDir dir("cli");
  pipeline(dir);
  for (const char* f : {"w.csv", "y.csv", "m.json", "p.csv"}) {
    CHECK(fs::exists(dir / f));
    const fs::path manifest = dir / (std::string(f) + ".manifest.json");
    REQUIRE(fs::exists(manifest));
    const auto m = nlohmann::json::parse(slurp(manifest));
    for (const char* key : {"verb", "inputs", "seeds", "versions", "started_at", "wall_clock_seconds",
                            "config"})
      CHECK(m.contains(key));
  }
  const auto tm = nlohmann::json::parse(slurp(dir / "m.json.manifest.json"));
  CHECK(tm.at("seeds").at("training") == 11);
  CHECK(tm.at("result").at("train_loss").size() == 2);

  // No temporary files left behind.
  int entries = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 8);

  const auto cp = load_checkpoint(dir / "m.json");
  CHECK(cp.info.train_cells.size() + cp.info.test_cells.size() == 5);
  const auto preds = load_yield_table(dir / "p.csv", Monotonicity::relax);
  CHECK(preds.size() == 5);
  CHECK(preds[0].n_years() == 2);

  const auto d = [&](const char* n) { return (dir / n).string(); };
  auto o = call({"evaluate", "--predictions", d("p.csv"), "--reference", d("y.csv"), "--out",
                 d("e.csv")});
  REQUIRE(o.status == 0);
  const std::string eval = slurp(dir / "e.csv");
  CHECK(eval.rfind("cell_id,year,frechet,hausdorff,mae,bias,ndi\n", 0) == 0);
  CHECK(std::count(eval.begin(), eval.end(), '\n') == 11);
  const auto summary = nlohmann::json::parse(slurp(dir / "e.csv.summary.json"));
  CHECK(summary.contains("frechet"));

  o = call({"evaluate", "--predictions", d("p.csv"), "--reference", d("y.csv"), "--out",
            d("e_test.csv"), "--checkpoint", d("m.json")});
  REQUIRE(o.status == 0);
  const std::string held = slurp(dir / "e_test.csv");
  CHECK(std::count(held.begin(), held.end(), '\n') == 1 + 2 * int(cp.info.test_cells.size()));
}

TEST_CASE("reruns are byte-identical and --jobs does not change output") {
  testing::TempDir a("cli"), b("cli");
  pipeline(a, "1");
  pipeline(b, "3");
  for (const char* f : {"w.csv", "y.csv", "m.json", "p.csv"})
    CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("biasadjust and aoc verbs") {
  testing::TempDir dir("cli");
  const auto d = [&](const char* n) { return (dir / n).string(); };
  REQUIRE(call({"gen-data", "--out", d("ref.csv"), "--cells", "2", "--years", "4", "--seed", "1"})
              .status == 0);
  REQUIRE(call({"gen-data", "--out", d("hist.csv"), "--cells", "2", "--years", "4", "--seed", "2"})
              .status == 0);
  REQUIRE(call({"gen-data", "--out", d("proj.csv"), "--cells", "2", "--years", "4", "--seed", "2",
                "--warming", "1.5", "--precip-factor", "0.9"})
              .status == 0);
  auto o = call({"biasadjust", "--reference", d("ref.csv"), "--historical", d("hist.csv"),
                 "--projected", d("proj.csv"), "--out", d("adj.csv"), "--monthly"});
  REQUIRE(o.status == 0);
  const auto adj = load_weather_table(dir / "adj.csv");
  CHECK(adj.size() == 2);
  CHECK(adj[0].n_years() == 4);
  CHECK(call({"biasadjust", "--reference", d("ref.csv"), "--historical", d("hist.csv"),
              "--projected", d("proj.csv"), "--out", d("adj.csv"), "--precip-kind", "ratio"})
            .status == 2);

  // Reference: one member, four years of end-of-year yields 70/80/90/160
  // (mean 100). Forecast: four members for one year.
  std::vector<EnsembleYield> ref, fc;
  const double eoy[] = {70, 80, 90, 160};
  EnsembleYield r;
  r.member_id = 0;
  r.series.cell = CellId{"a", 45, 5};
  r.series.start_year = 2001;
  r.series.twso = Eigen::VectorXd::Zero(4 * kDaysPerYear);
  for (int k = 0; k < 4; ++k)
    r.series.twso[(k + 1) * kDaysPerYear - 1] = eoy[k];
  ref.push_back(r);
  const double members[] = {60, 65, 70, 120};
  for (int m = 0; m < 4; ++m) {
    EnsembleYield e;
    e.member_id = m;
    e.series.cell = r.series.cell;
    e.series.start_year = 2005;
    e.series.twso = Eigen::VectorXd::Constant(kDaysPerYear, members[m]);
    fc.push_back(e);
  }
  {
    std::ofstream f(dir / "ref_y.csv");
    write_ensemble_table(f, ref);
    std::ofstream g(dir / "fc_y.csv");
    write_ensemble_table(g, fc);
  }
  o = call({"aoc", "--reference", d("ref_y.csv"), "--forecast", d("fc_y.csv"), "--out", d("aoc.csv")});
  REQUIRE(o.status == 0);
  CHECK(slurp(dir / "aoc.csv") ==
        "cell_id,lat,lon,p_below,p_normal,p_above,category,is_aoc\na,,,0.75,0,0.25,below-normal,1\n");

  o = call({"aoc", "--mode", "decadal", "--reference", d("ref_y.csv"), "--projection", d("ref_y.csv"),
            "--window", "3", "--out", d("dec.csv")});
  REQUIRE(o.status == 0);
  CHECK(slurp(dir / "dec.csv") == "cell_id,window_start,window_end,is_aoc\na,2001,2003,1\na,2004,2004,0\n");

  CHECK(call({"aoc", "--reference", d("ref_y.csv"), "--out", d("x.csv")}).status == 2);
  CHECK(call({"aoc", "--mode", "sideways", "--reference", d("ref_y.csv"), "--out", d("x.csv")})
            .status == 2);
}

TEST_CASE("bench reports per cell-year timings") {
  const auto o = call({"bench", "--cells", "100", "--years", "1", "--hidden", "8", "--warmup", "2"});
  REQUIRE(o.status == 0);
  const auto j = nlohmann::json::parse(o.out);
  CHECK(j.at("cell_years") == 100);
  CHECK(j.at("median_seconds_per_cell_year").get<double>() > 0.0);
  CHECK(call({"bench", "--cells", "10", "--years", "1"}).status == 2);
}

TEST_CASE("the installed binary runs") {
  testing::TempDir dir("cli");
  const std::string log = (dir / "log.txt").string();
  const std::string cmd = std::string("\"") + SECS_BINARY + "\" frobnicate > \"" + log + "\" 2>&1";
  const int raw = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(raw));
  CHECK(WEXITSTATUS(raw) == 2);
  const std::string ok = std::string("\"") + SECS_BINARY + "\" gen-data --cells 1 --years 1 --out \"" +
                         (dir / "w.csv").string() + "\" > \"" + log + "\" 2>&1";
  CHECK(std::system(ok.c_str()) == 0);
  CHECK(fs::exists(dir / "w.csv"));
}
