#include <doctest.h>

#include <algorithm>

#include "epi/error.hpp"
#include "epi/simulate.hpp"

using namespace epi;

namespace {

SimulationConfig config(std::size_t n, int T, std::uint64_t seed) {
  SimulationConfig c;
  c.districts = n;
  c.weeks = T;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("simulation is reproducible from its seed") {
  const SimulatedData a = simulate_panel(config(25, 6, 3));
  const SimulatedData b = simulate_panel(config(25, 6, 3));
  const SimulatedData c = simulate_panel(config(25, 6, 4));
  CHECK(a.panel.counts == b.panel.counts);
  CHECK(a.registry.coordinates() == b.registry.coordinates());
  CHECK(a.embedding.coordinates == b.embedding.coordinates);
  CHECK(a.panel.counts != c.panel.counts);
  const auto la = simulate_line_list(a, 9), lb = simulate_line_list(b, 9);
  REQUIRE(la.size() == lb.size());
  for (std::size_t i = 0; i < la.size(); i += 97) {
    CHECK(la[i].case_id == lb[i].case_id);
    CHECK(la[i].report_date == lb[i].report_date);
  }
}

TEST_CASE("simulated study is internally consistent") {
  const SimulatedData s = simulate_panel(config(30, 8, 5));
  const auto& truth = s.config.truth;
  CHECK(s.registry.size() == 30);
  CHECK(s.colocation.size() == 8);
  CHECK(s.gini.values.cols() == 8);
  CHECK(s.staying_put_daily.size() == 30u * 8 * 7);
  CHECK(s.f_coord.mean() == doctest::Approx(0.0).scale(1.0));
  CHECK(s.f_soc.mean() == doctest::Approx(0.0).scale(1.0));
  CHECK(s.nu_epidemic.col(0).isZero());
  for (Eigen::Index cell : {Eigen::Index{0}, Eigen::Index{57}, Eigen::Index{119}})
    for (int t = 1; t < 8; ++t)
      CHECK(s.nu_epidemic(cell, t) == doctest::Approx(truth.ar * std::log(s.panel.rates(cell, t - 1) + truth.c)));

  const auto cases = simulate_line_list(s, 2);
  CHECK(static_cast<double>(cases.size()) == s.panel.counts.sum());
  AggregationLog log;
  const SurveillancePanel again = aggregate_panel(cases, s.registry, s.calendar, &log);
  CHECK(again.counts == s.panel.counts);
  CHECK(log.used == cases.size());
  for (const auto& c : cases) {
    REQUIRE(c.onset_date.has_value());
    REQUIRE(*c.onset_date <= c.report_date);
    REQUIRE(c.state_id == s.registry[s.registry.index_of(c.district_id)].state_id);
  }
}

TEST_CASE("without autoregression counts average the endemic mean") {
  SimulationConfig cfg = config(200, 12, 8);
  cfg.truth.ar = 0.0;
  const SimulatedData s = simulate_panel(cfg);
  const double expected = s.nu_endemic.array().exp().sum();
  CHECK(s.panel.counts.sum() == doctest::Approx(expected).epsilon(0.02));
  // Dispersion: E (y - mu)^2 = mu + mu^2 / phi.
  const Eigen::ArrayXXd mu = s.nu_endemic.array().exp();
  const double resid = (s.panel.counts.array() - mu).square().sum();
  const double var = (mu + mu.square() / cfg.truth.dispersion).sum();
  CHECK(resid == doctest::Approx(var).epsilon(0.1));
}

TEST_CASE("missingness hits the requested fraction") {
  const SimulatedData s = simulate_panel(config(120, 10, 6));
  std::vector<CaseRecord> cases = simulate_line_list(s, 1);
  while (cases.size() < 100000) {
    const auto more = simulate_line_list(s, cases.size());
    cases.insert(cases.end(), more.begin(), more.end());
  }
  const auto none = apply_missingness(cases, 0.0, 3);
  CHECK(std::all_of(none.begin(), none.end(), [](const CaseRecord& c) { return c.onset_date.has_value(); }));

  const auto blanked = apply_missingness(cases, 0.3, 3);
  const auto missing = std::count_if(blanked.begin(), blanked.end(), [](const CaseRecord& c) { return !c.onset_date; });
  CHECK(static_cast<double>(missing) / cases.size() == doctest::Approx(0.3).epsilon(0.01 / 0.3));
  for (std::size_t i = 0; i < cases.size(); i += 101)
    if (blanked[i].onset_date) CHECK(*blanked[i].onset_date == *cases[i].onset_date);

  const auto mar = apply_missingness(cases, 0.3, 3, 1.0);
  double older = 0, older_missing = 0, younger = 0, younger_missing = 0;
  for (const auto& c : mar) {
    const bool old = c.group.age == AgeBand::age36_59 && !c.weekend;
    const bool young = c.group.age == AgeBand::age15_35 && !c.weekend;
    older += old;
    younger += young;
    older_missing += old && !c.onset_date;
    younger_missing += young && !c.onset_date;
  }
  CHECK(older_missing / older > younger_missing / younger + 0.1);
  CHECK_THROWS_AS(apply_missingness(cases, 1.0, 3), Error);
}

TEST_CASE("invalid simulation settings are rejected") {
  CHECK_THROWS_AS(simulate_panel(config(2, 6, 1)), Error);
  CHECK_THROWS_AS(simulate_panel(config(10, 1, 1)), Error);
  SimulationConfig cfg = config(10, 5, 1);
  cfg.truth.c = 1.5;
  CHECK_THROWS_AS(simulate_panel(cfg), Error);
  cfg = config(10, 5, 1);
  cfg.population_max = 1.0;
  CHECK_THROWS_AS(simulate_panel(cfg), Error);
}
