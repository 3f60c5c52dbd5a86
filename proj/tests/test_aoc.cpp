#include "secs/aoc.hpp"
#include "secs/error.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace secs;

namespace {

const TercileThresholds kWorked{-23.4, -16.8};

AocCategory expected_single(Tercile t) {
  switch (t) {
  case Tercile::below:
    return AocCategory::below_normal;
  case Tercile::normal:
    return AocCategory::normal;
  case Tercile::above:
    return AocCategory::above_normal;
  }
  return AocCategory::inconclusive;
}

} // namespace

TEST_CASE("relative anomaly examples") {
  CHECK(relative_anomaly(100, 100) == 0.0);
  CHECK(relative_anomaly(95, 100) == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(relative_anomaly(120, 100) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK_THROWS_AS(relative_anomaly(1, 0), DomainError);
  CHECK_THROWS_AS(relative_anomaly(1, -3), DomainError);
}

TEST_CASE("tercile examples") {
  const std::vector<double> worked{-30, -20, -10, 5, 8};
  const auto th = fit_terciles(worked);
  CHECK(std::abs(th.t33 - -23.4) < 1e-12);
  CHECK(std::abs(th.t66 - -16.8) < 1e-12);

  const std::vector<double> positive{1, 2, 3, 4};
  CHECK_THROWS_AS(fit_terciles(positive), InsufficientReferenceError);
  const std::vector<double> two_neg{-1, -2, 0, 3};
  CHECK_THROWS_AS(fit_terciles(two_neg), InsufficientReferenceError);

  const std::vector<double> flat(7, -10.0);
  const auto f = fit_terciles(flat);
  CHECK(f.t33 == -10.0);
  CHECK(f.t66 == -10.0);
}

TEST_CASE("classification examples") {
  CHECK(classify_anomaly(-5, kWorked) == Tercile::above);
  CHECK(classify_anomaly(-18, kWorked) == Tercile::normal);
  CHECK(classify_anomaly(-25, kWorked) == Tercile::below);
  CHECK(classify_anomaly(-23.4, kWorked) == Tercile::normal);
  CHECK(classify_anomaly(-16.8, kWorked) == Tercile::normal);
  CHECK(classify_anomaly(12, kWorked) == Tercile::above);
}

TEST_CASE("classification is monotone in the anomaly") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(-60, 20);
  for (int t = 0; t < 2000; ++t) {
    double lo = u(gen), hi = u(gen);
    if (lo > hi)
      std::swap(lo, hi);
    double a = u(gen), b = u(gen);
    const TercileThresholds th{std::min(a, b) - 20, std::min(a, b) - 20 + std::abs(a - b) * 0.1};
    CHECK(int(classify_anomaly(lo, th)) <= int(classify_anomaly(hi, th)));
  }
}

TEST_CASE("category probability examples") {
  const std::vector<double> unanimous(10, -25.0);
  auto p = category_probabilities(unanimous, kWorked);
  CHECK(p.p_below == 1.0);
  CHECK(p.p_normal == 0.0);
  CHECK(p.p_above == 0.0);

  std::vector<double> split;
  for (int i = 0; i < 17; ++i) {
    split.push_back(-30);
    split.push_back(-20);
    split.push_back(3);
  }
  p = category_probabilities(split, kWorked);
  CHECK(p.p_below == doctest::Approx(1.0 / 3));
  CHECK(p.p_normal == doctest::Approx(1.0 / 3));
  CHECK(p.p_above == doctest::Approx(1.0 / 3));
  CHECK(decide_category(p).category == AocCategory::inconclusive);

  const std::vector<double> pair{-30, 1};
  p = category_probabilities(pair, kWorked);
  CHECK(p.p_below == 0.5);
  CHECK(p.p_normal == 0.0);
  CHECK(p.p_above == 0.5);

  CHECK_THROWS_AS(category_probabilities(std::vector<double>{}, kWorked), DomainError);
}

TEST_CASE("decision examples") {
  auto d = decide_category({0.4, 0.3, 0.3});
  CHECK(d.category == AocCategory::below_normal);
  CHECK(d.is_aoc);
  d = decide_category({0.35, 0.30, 0.35});
  CHECK(d.category == AocCategory::inconclusive);
  CHECK_FALSE(d.is_aoc);
  d = decide_category({0.0, 0.5, 0.5});
  CHECK(d.category == AocCategory::normal_to_above);
  CHECK(decide_category({0.0, 1.0, 0.0}).category == AocCategory::normal);
  CHECK(decide_category({0.3, 0.4, 0.3}).category == AocCategory::normal);
  CHECK(decide_category({0.4, 0.4, 0.2}).category == AocCategory::inconclusive);
  CHECK(decide_category({0.2, 0.2, 0.6}).category == AocCategory::above_normal);
  CHECK(to_string(AocCategory::normal_to_above) == "normal-to-above");
}

TEST_CASE("decisions agree with the rule listing on every 51-member lattice triple") {
  int checked = 0, mismatches = 0;
  for (int below = 0; below <= 51; ++below)
    for (int normal = 0; normal + below <= 51; ++normal) {
      const int above = 51 - below - normal;
      // Probabilities as the ensemble path produces them.
      std::vector<double> members;
      members.insert(members.end(), std::size_t(below), -30.0);
      members.insert(members.end(), std::size_t(normal), -20.0);
      members.insert(members.end(), std::size_t(above), 2.0);
      const CategoryProbs p = category_probabilities(members, kWorked);
      CHECK(std::abs(p.p_below + p.p_normal + p.p_above - 1.0) < 1e-9);
      const auto expected = oracle::reference_category(below, normal, above);
      const auto via_members = decide_category(p);
      const auto direct = decide_category({below / 51.0, normal / 51.0, above / 51.0});
      if (via_members.category != expected || direct.category != expected ||
          via_members.is_aoc != (expected == AocCategory::below_normal))
        ++mismatches;
      ++checked;
    }
  CHECK(checked == 52 * 53 / 2);
  CHECK(mismatches == 0);
}

TEST_CASE("a single member decides like its own tercile") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-50, 20);
  for (int t = 0; t < 500; ++t) {
    const double a = u(gen);
    const std::vector<double> one{a};
    const auto d = decide_category(category_probabilities(one, kWorked));
    CHECK(d.category == expected_single(classify_anomaly(a, kWorked)));
  }
}

TEST_CASE("deterministic rule boundary is inclusive") {
  CHECK(deterministic_aoc(95, 100));
  CHECK_FALSE(deterministic_aoc(95.1, 100));
  CHECK_FALSE(deterministic_aoc(100, 100));
  for (double ref : {0.3, 7.0, 1234.5, 9876.1})
    CHECK(deterministic_aoc(0.95 * ref, ref));
  CHECK_THROWS_AS(deterministic_aoc(1, 0), DomainError);
}

TEST_CASE("probabilistic protocol is unchanged by a common rescaling") {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> n(6000, 900);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> ref(40), mem(51);
    for (auto& v : ref)
      v = std::max(1.0, n(gen));
    for (auto& v : mem)
      v = std::max(1.0, n(gen));
    const auto base = probabilistic_aoc(ref, mem);
    for (double k : {0.001, 0.37, 8.0, 1e4}) {
      std::vector<double> rs = ref, ms = mem;
      for (auto& v : rs)
        v *= k;
      for (auto& v : ms)
        v *= k;
      const auto scaled = probabilistic_aoc(rs, ms);
      CHECK(scaled.thresholds.t33 == doctest::Approx(base.thresholds.t33).epsilon(1e-9));
      CHECK(scaled.thresholds.t66 == doctest::Approx(base.thresholds.t66).epsilon(1e-9));
      CHECK(scaled.probs.p_below == base.probs.p_below);
      CHECK(scaled.probs.p_normal == base.probs.p_normal);
      CHECK(scaled.probs.p_above == base.probs.p_above);
      CHECK(scaled.decision.category == base.decision.category);
      CHECK(deterministic_aoc(ms[0], scaled.ref_mean) == deterministic_aoc(mem[0], base.ref_mean));
    }
  }
}

TEST_CASE("probabilistic protocol by hand") {
  // Reference mean 100; anomalies -30, -20, -10, +10, +50.
  const std::vector<double> ref{70, 80, 90, 110, 150};
  const std::vector<double> mem{70, 75, 99, 130};
  const auto r = probabilistic_aoc(ref, mem);
  CHECK(r.ref_mean == doctest::Approx(100));
  CHECK(r.thresholds.t33 == doctest::Approx(-23.4));
  CHECK(r.probs.p_below == 0.5);
  CHECK(r.probs.p_normal == 0.0);
  CHECK(r.probs.p_above == 0.5);
  CHECK(r.decision.category == AocCategory::inconclusive);
  CHECK_THROWS_AS(probabilistic_aoc(std::vector<double>{}, mem), InsufficientReferenceError);
}

TEST_CASE("decadal windows") {
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(10, 500.0);
  auto w = decadal_aoc(flat, 2021, 500.0);
  REQUIRE(w.size() == 1);
  CHECK_FALSE(w[0].is_aoc);
  w = decadal_aoc(Eigen::VectorXd(0.9 * flat), 2021, 500.0);
  CHECK(w[0].is_aoc);

  const Eigen::VectorXd long_run = Eigen::VectorXd::LinSpaced(36, 400, 600);
  w = decadal_aoc(long_run, 2015, 500.0);
  REQUIRE(w.size() == 4);
  CHECK(w[0].start_year == 2015);
  CHECK(w[0].end_year == 2024);
  CHECK(w[2].end_year == 2044);
  CHECK(w[3].start_year == 2045);
  CHECK(w[3].end_year == 2050);
  CHECK(w[3].mean_yield == doctest::Approx(long_run.tail(6).mean()));
  CHECK(w[0].is_aoc);
  CHECK_FALSE(w[3].is_aoc);

  CHECK_THROWS_AS(decadal_aoc(Eigen::VectorXd(0), 2000, 1.0), DomainError);
  CHECK_THROWS_AS(decadal_aoc(flat, 2000, 1.0, 0), ConfigError);
}
