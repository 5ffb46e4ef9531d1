#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "epi/model_fit.hpp"

namespace epi {

struct ResidualSet {
  Eigen::VectorXd residuals;
  Eigen::VectorXd lower;    // F(y - 1)
  Eigen::VectorXd upper;    // F(y)
  Eigen::VectorXd uniform;  // u drawn on (lower, upper)
  std::uint64_t seed = 0;
  int draw = 0;
};

// Randomized quantile residuals Phi^{-1}(u), u ~ U(F(y-1), F(y)) under NB(mu, phi).
ResidualSet rq_residuals(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi, std::uint64_t seed,
                         int draw = 0);
// Requires a negative-binomial fit.
ResidualSet rq_residuals(const FitResult& fit, std::uint64_t seed, int draw = 0);

struct Rootogram {
  Eigen::VectorXd observed;  // frequency of each count 0..max
  Eigen::VectorXd expected;  // sum over observations of the fitted pmf
  Eigen::VectorXd sqrt_observed() const { return observed.cwiseSqrt(); }
  Eigen::VectorXd sqrt_expected() const { return expected.cwiseSqrt(); }
  int max_count() const { return static_cast<int>(observed.size()) - 1; }
};

// max_count < 0 uses the largest observed count.
Rootogram rootogram(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi, int max_count = -1);
Rootogram rootogram(const FitResult& fit, int max_count = -1);

struct PredictedObserved {
  Eigen::VectorXd observed;
  Eigen::VectorXd predicted;
  Eigen::VectorXd log_observed;   // log(y + 1)
  Eigen::VectorXd log_predicted;  // log(mu + 1)
  double correlation = 0.0;       // Pearson, on the log(. + 1) scale
};

PredictedObserved predicted_vs_observed(const Eigen::VectorXd& y, const Eigen::VectorXd& mu);
PredictedObserved predicted_vs_observed(const FitResult& fit);

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct QQPoint {
  double theoretical = 0.0;
  double sample = 0.0;
  bool outlier = false;  // |sample - theoretical| > threshold
};

// Sorted residuals against normal quantiles at (i - 0.5) / n.
std::vector<QQPoint> normal_qq(const Eigen::VectorXd& residuals, double threshold = 1.0);

// Elementwise averages over the per-imputation summaries.
Rootogram average_rootograms(const std::vector<Rootogram>& rootograms);
std::vector<QQPoint> average_qq(const std::vector<std::vector<QQPoint>>& qq, double threshold = 1.0);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

// One-sample Kolmogorov-Smirnov test against N(0, 1) with the asymptotic distribution and the
// Stephens small-sample correction.
KsResult ks_test_normal(const Eigen::VectorXd& sample);

}  // namespace epi
