#include <doctest.h>

#include <algorithm>
#include <random>

#include "epi/error.hpp"
#include "epi/model_fit.hpp"
#include "epi/model_frame.hpp"
#include "epi/simulate.hpp"

using namespace epi;

namespace {

struct Study {
  SimulatedData data;
  FrameCovariates covariates;
};

Study small_study(std::size_t n, int T, double base_rate, std::uint64_t seed) {
  SimulationConfig cfg;
  cfg.districts = n;
  cfg.weeks = T;
  cfg.states = 3;
  cfg.base_rate = base_rate;
  cfg.seed = seed;
  Study s{simulate_panel(cfg), {}};
  s.covariates.gini = &s.data.gini;
  s.covariates.staying_put = &s.data.staying_put;
  s.covariates.geography = s.data.registry.coordinates();
  s.covariates.social = s.data.embedding.coordinates;
  return s;
}

FrameOptions light() {
  FrameOptions o;
  o.thinplate_rank = 8;
  return o;
}

}  // namespace

TEST_CASE("frame has one row per district, group and week after the first") {
  const std::size_t n = 401;
  const int T = 16;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  std::poisson_distribution<int> pois(2.0);
  SurveillancePanel panel;
  panel.calendar = {parse_date("2020-03-03"), T};
  panel.districts = n;
  panel.counts.resize(n * 4, T);
  for (Eigen::Index r = 0; r < panel.counts.rows(); ++r)
    for (int t = 0; t < T; ++t) panel.counts(r, t) = pois(rng);
  PopulationTable pop{Eigen::MatrixXd::Constant(n, 4, 25000.0)};
  compute_rates(panel, pop);
  FeatureSeries gini{FeatureKind::gini, true, Eigen::MatrixXd(n, T - 1)};
  FeatureSeries stay{FeatureKind::staying_put, true, Eigen::MatrixXd(n, T - 1)};
  for (Eigen::Index i = 0; i < gini.values.size(); ++i) {
    gini.values(i) = z(rng);
    stay.values(i) = z(rng);
  }
  FrameCovariates cov{&gini, &stay, Eigen::MatrixXd(n, 2), Eigen::MatrixXd(n, 2)};
  for (Eigen::Index i = 0; i < cov.geography.size(); ++i) {
    cov.geography(i) = z(rng);
    cov.social(i) = z(rng);
  }
  const ModelFrame frame(panel, pop, cov);
  CHECK(frame.rows() == 24060);
  const PenalizedDesign d = frame.design(0.5);
  CHECK(d.rows() == 24060);
  d.validate();

  const auto ar = std::find(d.names.begin(), d.names.end(), ModelFrame::ar_name()) - d.names.begin();
  REQUIRE(ar < d.cols());
  const Eigen::MatrixXd dense = Eigen::MatrixXd(d.X);
  for (Eigen::Index r : {Eigen::Index{0}, Eigen::Index{777}, Eigen::Index{24059}}) {
    const FrameRow key = frame.keys()[static_cast<std::size_t>(r)];
    const auto cell = SurveillancePanel::cell(key.district, key.group);
    CHECK(frame.response()(r) == panel.counts(cell, key.week - 1));
    CHECK(dense(r, ar) == doctest::Approx(std::log(panel.rates(cell, key.week - 2) + 0.5)));
    CHECK(frame.offset()(r) == doctest::Approx(std::log(25000.0)));
  }
  // The last-week district effect only appears on rows of week T.
  const auto b_first = std::find(d.names.begin(), d.names.end(), "b.1") - d.names.begin();
  REQUIRE(b_first < d.cols());
  for (Eigen::Index r = 0; r < d.rows(); ++r)
    if (frame.keys()[static_cast<std::size_t>(r)].week < T) {
      REQUIRE(dense.row(r).segment(b_first, static_cast<Eigen::Index>(n)).isZero());
    }
  CHECK_THROWS_AS(frame.design(0.0), Error);

  FeatureSeries short_gini{FeatureKind::gini, true, gini.values.leftCols(T - 3)};
  FrameCovariates bad = cov;
  bad.gini = &short_gini;
  CHECK_THROWS_WITH_AS(ModelFrame(panel, pop, bad), doctest::Contains("gini"), Error);
}

TEST_CASE("profiled offset constant maximizes the profile and fixed fits agree") {
  const Study s = small_study(20, 6, 1.0, 4);
  const ModelFrame frame(s.data.panel, s.data.population, s.covariates, light());
  const auto builder = [&](double c) { return frame.design(c); };

  FitOptions options;
  const FitResult fit = fit_model(builder, frame.response(), options);
  REQUIRE(fit.c_profiled);
  CHECK(fit.c >= options.c_lower);
  CHECK(fit.c <= options.c_upper);
  REQUIRE(!fit.profile.empty());
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : fit.profile) best = std::max(best, p.value);
  const auto at_c = std::find_if(fit.profile.begin(), fit.profile.end(),
                                 [&](const ProfilePoint& p) { return std::abs(p.c - fit.c) < 1e-12; });
  REQUIRE(at_c != fit.profile.end());
  CHECK(at_c->value >= best - 1e-6);
  CHECK(std::isfinite(fit.c_se));
  CHECK(fit.c_se > 0.0);

  CHECK(caic(fit) == doctest::Approx(-2.0 * fit.loglik + 2.0 * (fit.edf_total + 1.0)));
  CHECK(fit.se.size() == fit.theta.size());
  CHECK(fit.se(fit.index_of("ar1")) == doctest::Approx(std::sqrt(fit.covariance(fit.index_of("ar1"), fit.index_of("ar1")))));
  CHECK_THROWS_AS(fit.index_of("nope"), Error);

  FitOptions fixed = options;
  fixed.profile = false;
  fixed.fixed_c = 0.3;
  const FitResult a = fit_model(builder, frame.response(), fixed);
  const FitResult b = fit_fixed_c(frame.design(0.3), frame.response(), 0.3, fixed);
  CHECK_FALSE(a.c_profiled);
  CHECK(a.c == 0.3);
  CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(a.reml == doctest::Approx(b.reml));
}

TEST_CASE("profile is flat when no lagged rate is near zero") {
  const Study s = small_study(15, 5, 400.0, 9);
  REQUIRE(s.data.panel.rates.minCoeff() > 5.0);
  const ModelFrame frame(s.data.panel, s.data.population, s.covariates, light());
  FitOptions options;
  options.profile_refinements = 0;
  const ProfileResult profile = profile_c([&](double c) { return frame.design(c); }, frame.response(), options);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : profile.points) {
    lo = std::min(lo, p.value);
    hi = std::max(hi, p.value);
  }
  CHECK(hi - lo < 1.0);
}

TEST_CASE("family choices fit the same frame") {
  const Study s = small_study(15, 5, 2.0, 12);
  FrameOptions o = light();
  o.social_smooth = false;
  const ModelFrame frame(s.data.panel, s.data.population, s.covariates, o);
  const PenalizedDesign d = frame.design(0.5);
  for (FamilyKind f : {FamilyKind::negative_binomial, FamilyKind::quasi_poisson}) {
    FitOptions opt;
    opt.family = f;
    const FitResult fit = fit_fixed_c(d, frame.response(), 0.5, opt);
    CHECK(fit.family == f);
    CHECK(fit.theta.allFinite());
    CHECK(fit.mu.size() == frame.rows());
  }
}
