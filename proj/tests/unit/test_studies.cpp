#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <random>

#include "epi/delay.hpp"
#include "epi/diagnostics.hpp"
#include "epi/model_fit.hpp"
#include "epi/model_frame.hpp"
#include "epi/simulate.hpp"

// Small simulation studies behind the statistical guarantees of each module.

using namespace epi;

namespace {

const Date kAnchor = parse_date("2020-03-03");
const std::vector<std::string> kFixed = {"(Intercept)", "male", "age36_59", "age36_59:male", "weekend", "state:S2"};

// Report dates uniform over ten weeks, delays drawn given the report.
std::vector<CaseRecord> delay_cases(int n, const Eigen::VectorXd& mu_coef, double log_sigma, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> district(0, 5), group(0, 3), day(0, 69);
  std::vector<CaseRecord> out;
  for (int i = 0; i < n; ++i) {
    const int d = district(rng);
    const GroupKey g = GroupKey::from_index(group(rng));
    const Date report = kAnchor + std::chrono::days{day(rng)};
    const bool male = g.gender == Gender::male, older = g.age == AgeBand::age36_59, weekend = is_weekend(report);
    const double log_mu = mu_coef(0) + male * mu_coef(1) + older * mu_coef(2) + (male && older) * mu_coef(3) +
                          weekend * mu_coef(4) + (d >= 3) * mu_coef(5);
    const int delay = draw_negative_binomial(std::exp(log_mu), std::exp(log_sigma), rng);
    out.emplace_back("c" + std::to_string(i), "D" + std::to_string(d), d < 3 ? "S1" : "S2", g, report,
                     report - std::chrono::days{delay});
  }
  return out;
}

DelayOptions quick_delay() {
  DelayOptions o;
  o.trend.basis_size = 8;
  return o;
}

double nb_sigma_pmf(int y, double mu, double sigma) {
  const double r = 1.0 / sigma;
  return std::exp(std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) + r * std::log(r / (r + mu)) +
                  y * std::log(mu / (r + mu)));
}

struct Study {
  SimulatedData data;
  FrameCovariates covariates;
};

Study study(std::size_t n, int T, std::uint64_t seed, double gini_effect = 0.15) {
  SimulationConfig cfg;
  cfg.districts = n;
  cfg.weeks = T;
  cfg.states = 3;
  cfg.seed = seed;
  cfg.gini_effect = gini_effect;
  Study s{simulate_panel(cfg), {}};
  s.covariates = {&s.data.gini, &s.data.staying_put, s.data.registry.coordinates(), s.data.embedding.coordinates};
  return s;
}

// Appends one unpenalized column to a built design.
PenalizedDesign with_column(const PenalizedDesign& d, const Eigen::VectorXd& column, const std::string& name) {
  std::vector<Eigen::Triplet<double>> entries;
  for (Eigen::Index r = 0; r < d.X.outerSize(); ++r)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(d.X, r); it; ++it)
      entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (Eigen::Index r = 0; r < column.size(); ++r) entries.emplace_back(static_cast<int>(r), static_cast<int>(d.cols()), column(r));
  PenalizedDesign out = d;
  out.X.resize(d.rows(), d.cols() + 1);
  out.X.setFromTriplets(entries.begin(), entries.end());
  out.names.push_back(name);
  out.terms.push_back({name, d.cols(), 1, {}, 0});
  out.validate();
  return out;
}

}  // namespace

TEST_CASE("delay coefficients are recovered within three standard errors") {
  Eigen::VectorXd mu_coef(6);
  mu_coef << std::log(5.0), 0.1, 0.2, -0.1, 0.15, -0.1;
  const double log_sigma = std::log(0.3);
  const int reps = 50;
  std::vector<int> hits_mu(kFixed.size(), 0), hits_sigma(kFixed.size(), 0);
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < reps; ++rep) {
    const DelayModel m = fit_delay_model(delay_cases(1500, mu_coef, log_sigma, rng), quick_delay());
    for (std::size_t j = 0; j < kFixed.size(); ++j) {
      const auto idx = std::find(m.names().begin(), m.names().end(), kFixed[j]) - m.names().begin();
      const double truth_sigma = j == 0 ? log_sigma : 0.0;
      hits_mu[j] += std::abs(m.theta_mu()(idx) - mu_coef(static_cast<Eigen::Index>(j))) <= 3.0 * std::sqrt(m.covariance_mu()(idx, idx));
      hits_sigma[j] += std::abs(m.theta_sigma()(idx) - truth_sigma) <= 3.0 * std::sqrt(m.covariance_sigma()(idx, idx));
    }
  }
  for (std::size_t j = 0; j < kFixed.size(); ++j) {
    INFO(kFixed[j]);
    CHECK(hits_mu[j] >= 0.95 * reps);
    CHECK(hits_sigma[j] >= 0.95 * reps);
  }
}

TEST_CASE("imputed delays follow the fitted distribution at one covariate point") {
  std::mt19937_64 rng(77);
  Eigen::VectorXd mu_coef(6);
  mu_coef << std::log(4.0), 0.1, 0.0, 0.0, 0.0, 0.0;
  const DelayModel m = fit_delay_model(delay_cases(3000, mu_coef, std::log(0.4), rng), quick_delay());
  CaseRecord probe("p", "D1", "S1", GroupKey{AgeBand::age36_59, Gender::male}, parse_date("2020-04-08"), std::nullopt);
  const std::vector<CaseRecord> many(10000, probe);
  const double mu = m.predict_mu({probe})(0), sigma = m.predict_sigma({probe})(0);
  const auto filled = sample_delays(m, many, rng);
  std::vector<int> freq(400, 0);
  double sum = 0.0, sq = 0.0;
  for (const auto& c : filled) {
    const int d = delay_days(c);
    ++freq[static_cast<std::size_t>(std::min(d, 399))];
    sum += d;
    sq += static_cast<double>(d) * d;
  }
  const double n = static_cast<double>(filled.size());
  const double mean = sum / n, var = (sq - n * mean * mean) / (n - 1.0);
  CHECK(mean == doctest::Approx(mu).epsilon(0.05));
  CHECK(var == doctest::Approx(mu + sigma * mu * mu).epsilon(0.05));

  double chi2 = 0.0, tail_p = 1.0, tail_obs = n;
  int cells = 0;
  for (int y = 0; y < 400; ++y) {
    const double p = nb_sigma_pmf(y, mu, sigma);
    if (n * p < 5.0) break;
    chi2 += (freq[static_cast<std::size_t>(y)] - n * p) * (freq[static_cast<std::size_t>(y)] - n * p) / (n * p);
    tail_p -= p;
    tail_obs -= freq[static_cast<std::size_t>(y)];
    ++cells;
  }
  chi2 += (tail_obs - n * tail_p) * (tail_obs - n * tail_p) / (n * tail_p);
  CHECK(boost::math::cdf(boost::math::complement(boost::math::chi_squared(cells), chi2)) > 0.01);
}

TEST_CASE("complete line lists give identical imputations and K defaults to 20") {
  CHECK(kDefaultImputations == 20);
  std::mt19937_64 rng(5);
  Eigen::VectorXd mu_coef = Eigen::VectorXd::Zero(6);
  mu_coef(0) = std::log(3.0);
  const auto cases = delay_cases(600, mu_coef, std::log(0.3), rng);
  const DelayModel m = fit_delay_model(cases, quick_delay());
  std::vector<District> districts;
  for (int d = 0; d < 6; ++d) districts.push_back({"D" + std::to_string(d), d < 3 ? "S1" : "S2", double(d), 0.0});
  const DistrictRegistry registry(districts);
  const PopulationTable pop{Eigen::MatrixXd::Constant(6, 4, 1e4)};
  const auto sets = build_imputations(cases, m, 4, 9, registry, pop, WeekCalendar{kAnchor - std::chrono::days{14}, 13});
  for (const auto& s : sets) CHECK(s.panel.counts == sets.front().panel.counts);
}

TEST_CASE("quasi-Poisson and negative-binomial fits agree") {
  const Study s = study(30, 8, 21);
  FrameOptions opt;
  opt.thinplate_rank = 10;
  const ModelFrame frame(s.data.panel, s.data.population, s.covariates, opt);
  const PenalizedDesign d = frame.design(0.5);
  FitOptions nb, quasi;
  quasi.family = FamilyKind::quasi_poisson;
  const FitResult a = fit_fixed_c(d, frame.response(), 0.5, nb);
  const FitResult b = fit_fixed_c(d, frame.response(), 0.5, quasi);
  for (const char* name : {"male", "age36_59", "age36_59:male", "ar1", "gini:week4", "staying_put:week6"}) {
    INFO(name);
    const auto j = a.index_of(name);
    CHECK(std::abs(a.theta(j) - b.theta(b.index_of(name))) < 2.0 * a.se(j));
  }
}

TEST_CASE("a pure-noise column costs little conditional AIC") {
  double total = 0.0;
  const int reps = 6;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int rep = 0; rep < reps; ++rep) {
    const Study s = study(25, 6, 100 + rep);
    FrameOptions opt;
    opt.thinplate_rank = 8;
    const ModelFrame frame(s.data.panel, s.data.population, s.covariates, opt);
    const PenalizedDesign d = frame.design(0.5);
    Eigen::VectorXd noise(frame.rows());
    for (auto& v : noise) v = z(rng);
    const double base = caic(fit_fixed_c(d, frame.response(), 0.5));
    const double noisy = caic(fit_fixed_c(with_column(d, noise, "noise"), frame.response(), 0.5));
    total += noisy - base;
  }
  CHECK(std::abs(total / reps) < 4.0);
}

TEST_CASE("rootogram deviations stay within the re-simulation envelope") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  const int n = 3000;
  const double phi = 3.0;
  Eigen::VectorXd x(n), mu(n), y(n);
  const auto draw = [&](const Eigen::VectorXd& m, double size) {
    Eigen::VectorXd out(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::gamma_distribution<double> g(size, m(i) / size);
      out(i) = std::poisson_distribution<long long>(g(rng))(rng);
    }
    return out;
  };
  for (int i = 0; i < n; ++i) {
    x(i) = u(rng);
    mu(i) = std::exp(0.2 + x(i));
  }
  y = draw(mu, phi);
  DesignBuilder b(n);
  b.add("(Intercept)", Eigen::MatrixXd::Ones(n, 1), {"(Intercept)"});
  b.add("x", x, {"x"});
  const PenalizedDesign d = b.build(Eigen::VectorXd::Zero(n));
  const FitResult fit = fit_fixed_c(d, y, 0.5);
  const auto deviation = [&](const Eigen::VectorXd& obs) {
    const Rootogram r = rootogram(obs, fit.mu, fit.dispersion, 30);
    return (r.sqrt_observed() - r.sqrt_expected()).cwiseAbs().mean();
  };
  double noise = 0.0;
  for (int rep = 0; rep < 50; ++rep) noise += deviation(draw(fit.mu, fit.dispersion));
  noise /= 50.0;
  CHECK(deviation(y) <= 2.0 * noise);

  // Strong signal: fitted and observed agree on the log scale.
  CHECK(predicted_vs_observed(fit).correlation > 0.8);
}
