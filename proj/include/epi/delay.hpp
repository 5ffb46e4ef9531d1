#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "epi/basis.hpp"
#include "epi/panel.hpp"
#include "epi/penalized.hpp"
#include "epi/smoothing.hpp"

namespace epi {

inline constexpr int kDefaultImputations = 20;

struct DelayOptions {
  SmoothSpec trend{SmoothKind::pspline, 20, 3, 2, true};
  bool district_effect = true;
  SmoothingOptions smoothing;
  double tolerance = 1e-6;  // relative change of the joint log-likelihood
  int max_cycles = 100;
};

// Location-scale negative-binomial model for the onset-to-report delay:
//   E(D) = mu, Var(D) = mu + sigma mu^2, with log mu and log sigma linear in the same covariates
// (intercept, group dummies, weekend, state dummies, smooth report-date trend, district ridge effect).
class DelayModel {
 public:
  // Design rows for the given cases under the fitted layout. Unknown districts get a zero random
  // effect and unknown states the reference level; both are counted in `unresolved` when given.
  PenalizedDesign design(const std::vector<CaseRecord>& cases, std::size_t* unresolved = nullptr) const;
  Eigen::VectorXd predict_mu(const std::vector<CaseRecord>& cases) const;
  Eigen::VectorXd predict_sigma(const std::vector<CaseRecord>& cases) const;

  const std::vector<std::string>& names() const { return names_; }
  const Eigen::VectorXd& theta_mu() const { return theta_mu_; }
  const Eigen::VectorXd& theta_sigma() const { return theta_sigma_; }
  const Eigen::MatrixXd& covariance_mu() const { return cov_mu_; }
  const Eigen::MatrixXd& covariance_sigma() const { return cov_sigma_; }
  const Eigen::VectorXd& lambda_mu() const { return lambda_mu_; }
  const Eigen::VectorXd& lambda_sigma() const { return lambda_sigma_; }
  double loglik() const { return loglik_; }
  int cycles() const { return cycles_; }

  friend DelayModel fit_delay_model(const std::vector<CaseRecord>& complete, const DelayOptions& options);

 private:
  DelayOptions options_;
  Date origin{};
  double trend_lower_ = 0.0;
  double trend_upper_ = 1.0;
  Eigen::MatrixXd trend_map_;  // constraint map of the trend block
  Eigen::MatrixXd trend_penalty_;
  std::vector<std::string> states_;
  std::unordered_map<std::string, int> state_index_;
  std::vector<std::string> districts_;
  std::unordered_map<std::string, int> district_index_;
  std::vector<std::string> names_;
  Eigen::VectorXd theta_mu_, theta_sigma_;
  Eigen::MatrixXd cov_mu_, cov_sigma_;
  Eigen::VectorXd lambda_mu_, lambda_sigma_;
  double loglik_ = 0.0;
  int cycles_ = 0;
};

// Delay in days (report - onset) of a complete case.
int delay_days(const CaseRecord& record);

// Backfitting: mean predictor with dispersion phi_l = 1/sigma_l held fixed, then the scale predictor
// with the means held fixed, until the joint log-likelihood settles. Needs >= 50 complete cases on
// >= 2 report dates.
DelayModel fit_delay_model(const std::vector<CaseRecord>& complete, const DelayOptions& options = {});

// Draws NB(mu, sigma) delays by the gamma-Poisson mixture.
int draw_negative_binomial(double mu, double sigma, std::mt19937_64& rng);

// Fills the missing onset dates with report_date - d for sampled delays d. Complete cases are
// returned unchanged.
std::vector<CaseRecord> sample_delays(const DelayModel& model, const std::vector<CaseRecord>& cases,
                                      std::mt19937_64& rng, std::size_t* unresolved = nullptr);

struct ImputedDataset {
  int k = 0;  // 1-based
  std::vector<CaseRecord> cases;
  SurveillancePanel panel;
  AggregationLog log;
};

// Independent random stream for imputation k derived from one seed.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t k);

// K >= 2 imputed line lists and their aggregated panels (rates computed from `population`).
std::vector<ImputedDataset> build_imputations(const std::vector<CaseRecord>& cases, const DelayModel& model, int K,
                                              std::uint64_t seed, const DistrictRegistry& registry,
                                              const PopulationTable& population, const WeekCalendar& calendar);

}  // namespace epi
