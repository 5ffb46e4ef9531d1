#include "epi/delay.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "epi/error.hpp"
#include "epi/likelihood.hpp"

namespace epi {

int delay_days(const CaseRecord& record) {
  if (!record.onset_date) throw Error("case " + record.case_id + " has no onset date");
  return days_between(*record.onset_date, record.report_date);
}

PenalizedDesign DelayModel::design(const std::vector<CaseRecord>& cases, std::size_t* unresolved) const {
  const auto rows = static_cast<Eigen::Index>(cases.size());
  DesignBuilder builder(rows);
  std::vector<Eigen::Triplet<double>> fixed;
  const int n_states = static_cast<int>(states_.size());
  const int fixed_cols = 5 + std::max(0, n_states - 1);
  std::vector<std::string> fixed_names = {"(Intercept)", "male", "age36_59", "age36_59:male", "weekend"};
  for (int s = 1; s < n_states; ++s) fixed_names.push_back("state:" + states_[static_cast<std::size_t>(s)]);
  std::size_t missing = 0;
  std::vector<Eigen::Triplet<double>> trend, district;
  Eigen::VectorXd t(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const CaseRecord& c = cases[static_cast<std::size_t>(r)];
    const int row = static_cast<int>(r);
    fixed.emplace_back(row, 0, 1.0);
    const bool male = c.group.gender == Gender::male;
    const bool older = c.group.age == AgeBand::age36_59;
    if (male) fixed.emplace_back(row, 1, 1.0);
    if (older) fixed.emplace_back(row, 2, 1.0);
    if (male && older) fixed.emplace_back(row, 3, 1.0);
    if (c.weekend) fixed.emplace_back(row, 4, 1.0);
    const auto s = state_index_.find(c.state_id);
    if (s == state_index_.end()) {
      ++missing;
    } else if (s->second > 0) {
      fixed.emplace_back(row, 4 + s->second, 1.0);
    }
    t(r) = static_cast<double>(days_between(origin, c.report_date));
    if (options_.district_effect) {
      const auto d = district_index_.find(c.district_id);
      if (d == district_index_.end()) {
        ++missing;
      } else {
        district.emplace_back(row, d->second, 1.0);
      }
    }
  }
  builder.add_sparse("fixed", fixed_cols, fixed, fixed_names);
  if (trend_map_.size() > 0) {
    const PSplineBasis basis(trend_lower_, trend_upper_, static_cast<int>(trend_map_.rows()), options_.trend.degree,
                             options_.trend.difference_order);
    const Eigen::MatrixXd b = basis.evaluate(t) * trend_map_;
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < b.cols(); ++j) names.push_back("f_trend." + std::to_string(j + 1));
    builder.add("f_trend", b, names, trend_penalty_, null_space_dimension(trend_penalty_));
  }
  if (options_.district_effect) {
    std::vector<std::string> names;
    for (const auto& d : districts_) names.push_back("district:" + d);
    builder.add_sparse("district", static_cast<Eigen::Index>(districts_.size()), district, names,
                       Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(districts_.size()),
                                                 static_cast<Eigen::Index>(districts_.size())));
  }
  if (unresolved) *unresolved = missing;
  return builder.build(Eigen::VectorXd::Zero(rows));
}

Eigen::VectorXd DelayModel::predict_mu(const std::vector<CaseRecord>& cases) const {
  const PenalizedDesign d = design(cases);
  return (d.X * theta_mu_).array().exp();
}

Eigen::VectorXd DelayModel::predict_sigma(const std::vector<CaseRecord>& cases) const {
  const PenalizedDesign d = design(cases);
  return (d.X * theta_sigma_).array().exp();
}

DelayModel fit_delay_model(const std::vector<CaseRecord>& complete, const DelayOptions& options) {
  if (complete.size() < 50) throw Error("the delay model needs at least 50 complete cases");
  std::set<Date> dates;
  std::set<std::string> states, districts;
  Eigen::VectorXd y(static_cast<Eigen::Index>(complete.size()));
  for (std::size_t i = 0; i < complete.size(); ++i) {
    const int d = delay_days(complete[i]);
    if (d < 0) throw Error("case " + complete[i].case_id + " has onset after report");
    y(static_cast<Eigen::Index>(i)) = d;
    dates.insert(complete[i].report_date);
    states.insert(complete[i].state_id);
    districts.insert(complete[i].district_id);
  }
  if (dates.size() < 2) throw Error("the delay model needs complete cases on at least two report dates");

  DelayModel model;
  model.options_ = options;
  model.origin = *dates.begin();
  model.trend_lower_ = 0.0;
  model.trend_upper_ = static_cast<double>(days_between(*dates.begin(), *dates.rbegin()));
  model.states_.assign(states.begin(), states.end());
  for (std::size_t s = 0; s < model.states_.size(); ++s) model.state_index_[model.states_[s]] = static_cast<int>(s);
  model.districts_.assign(districts.begin(), districts.end());
  for (std::size_t d = 0; d < model.districts_.size(); ++d)
    model.district_index_[model.districts_[d]] = static_cast<int>(d);
  if (model.districts_.size() < 2) model.options_.district_effect = false;

  // Fewer distinct dates than basis functions: shrink the basis; too few for a cubic: no trend.
  const int k = std::min(options.trend.basis_size, static_cast<int>(dates.size()));
  if (k > options.trend.degree + 1 && k > options.trend.difference_order + 1) {
    const PSplineBasis basis(model.trend_lower_, model.trend_upper_, k, options.trend.degree,
                             options.trend.difference_order);
    BasisBlock block;
    Eigen::VectorXd t(y.size());
    for (std::size_t i = 0; i < complete.size(); ++i)
      t(static_cast<Eigen::Index>(i)) = days_between(model.origin, complete[i].report_date);
    block.design = basis.evaluate(t);
    block.penalty = basis.penalty();
    block.constraint_map = Eigen::MatrixXd::Identity(k, k);
    const BasisBlock absorbed = options.trend.sum_to_zero ? absorb_sum_to_zero(block) : block;
    model.trend_map_ = absorbed.constraint_map;
    model.trend_penalty_ = absorbed.penalty;
  }

  const PenalizedDesign design = model.design(complete);
  model.names_ = design.names;

  SmoothingOptions first = options.smoothing;
  SmoothingOptions later = options.smoothing;
  later.starts = 1;

  // Start: near-Poisson mean fit, intercept-only scale from the moment identity.
  SmoothingProblem mean_problem;
  mean_problem.design = &design;
  mean_problem.likelihood = [&y](double) { return std::make_unique<NegBinMeanLikelihood>(y, 1e6); };
  SmoothingFit mean_fit = optimize_smoothing(mean_problem, first);
  Eigen::VectorXd mu = mean_fit.fit.eta.array().exp();
  const double excess = ((y - mu).array().square() - mu.array()).sum() / mu.array().square().sum();
  Eigen::VectorXd eta_sigma = Eigen::VectorXd::Constant(y.size(), std::log(std::max(excess, 1e-3)));

  SmoothingFit scale_fit;
  std::optional<Eigen::VectorXd> rho_mu = mean_fit.lambda.array().log().matrix(), rho_sigma;
  double previous = -std::numeric_limits<double>::infinity();
  for (int cycle = 1;; ++cycle) {
    if (cycle > options.max_cycles)
      throw ConvergenceError("delay backfitting did not settle within " + std::to_string(options.max_cycles) +
                             " cycles");
    const Eigen::VectorXd phi = (-eta_sigma).array().exp();
    mean_problem.likelihood = [&y, phi](double) { return std::make_unique<NegBinMeanLikelihood>(y, phi); };
    later.initial_log_lambda = rho_mu;
    mean_fit = optimize_smoothing(mean_problem, later);
    rho_mu = mean_fit.lambda.array().log().matrix();
    mu = mean_fit.fit.eta.array().exp();

    SmoothingProblem scale_problem;
    scale_problem.design = &design;
    scale_problem.likelihood = [&y, mu](double) { return std::make_unique<NegBinScaleLikelihood>(y, mu); };
    SmoothingOptions scale_options = rho_sigma ? later : first;
    scale_options.initial_log_lambda = rho_sigma;
    scale_fit = optimize_smoothing(scale_problem, scale_options);
    rho_sigma = scale_fit.lambda.array().log().matrix();
    eta_sigma = scale_fit.fit.eta;

    const double ll = scale_fit.fit.loglik;
    model.cycles_ = cycle;
    if (std::abs(ll - previous) < options.tolerance * (1.0 + std::abs(ll))) {
      model.loglik_ = ll;
      break;
    }
    previous = ll;
  }
  model.theta_mu_ = mean_fit.fit.theta;
  model.theta_sigma_ = scale_fit.fit.theta;
  model.cov_mu_ = mean_fit.covariance;
  model.cov_sigma_ = scale_fit.covariance;
  model.lambda_mu_ = mean_fit.lambda;
  model.lambda_sigma_ = scale_fit.lambda;
  return model;
}

int draw_negative_binomial(double mu, double sigma, std::mt19937_64& rng) {
  if (!(mu > 0.0)) return 0;
  double rate = mu;
  if (sigma > 1e-12) {
    std::gamma_distribution<double> gamma(1.0 / sigma, mu * sigma);
    rate = gamma(rng);
  }
  if (!(rate > 0.0)) return 0;
  std::poisson_distribution<long long> poisson(rate);
  return static_cast<int>(poisson(rng));
}

std::vector<CaseRecord> sample_delays(const DelayModel& model, const std::vector<CaseRecord>& cases,
                                      std::mt19937_64& rng, std::size_t* unresolved) {
  std::vector<CaseRecord> out = cases;
  std::vector<CaseRecord> missing;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < cases.size(); ++i)
    if (!cases[i].onset_date) {
      missing.push_back(cases[i]);
      where.push_back(i);
    }
  if (unresolved) *unresolved = 0;
  if (missing.empty()) return out;
  const PenalizedDesign d = model.design(missing, unresolved);
  const Eigen::VectorXd mu = (d.X * model.theta_mu()).array().exp();
  const Eigen::VectorXd sigma = (d.X * model.theta_sigma()).array().exp();
  for (std::size_t j = 0; j < missing.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    const int delay = draw_negative_binomial(mu(r), sigma(r), rng);
    out[where[j]].onset_date = missing[j].report_date - std::chrono::days{delay};
  }
  return out;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

std::vector<ImputedDataset> build_imputations(const std::vector<CaseRecord>& cases, const DelayModel& model, int K,
                                              std::uint64_t seed, const DistrictRegistry& registry,
                                              const PopulationTable& population, const WeekCalendar& calendar) {
  if (K < 2) throw Error("at least two imputations are needed for pooling");
  std::vector<ImputedDataset> out;
  out.reserve(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) {
    std::mt19937_64 rng = substream(seed, static_cast<std::uint64_t>(k));
    ImputedDataset data;
    data.k = k;
    data.cases = sample_delays(model, cases, rng);
    data.panel = aggregate_panel(data.cases, registry, calendar, &data.log);
    compute_rates(data.panel, population);
    out.push_back(std::move(data));
  }
  return out;
}

}  // namespace epi
