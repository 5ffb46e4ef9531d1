#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "epi/likelihood.hpp"
#include "epi/penalized.hpp"

namespace epi {

// How the scale/dispersion parameter of the likelihood is handled by the outer iteration.
enum class DispersionMode {
  fixed,    // held at SmoothingProblem::dispersion
  reml,     // optimized jointly with the smoothing parameters (log scale)
  pearson,  // moment estimate sum (y - mu)^2 / V(mu) / (n - edf), alternated with smoothing selection
};

struct SmoothingProblem {
  const PenalizedDesign* design = nullptr;
  std::function<std::unique_ptr<Likelihood>(double dispersion)> likelihood;
  DispersionMode dispersion_mode = DispersionMode::fixed;
  double dispersion = 1.0;  // fixed value, or starting value
  // Needed in pearson mode: response and variance function V(mu) (without the dispersion factor).
  Eigen::VectorXd response;
  std::function<double(double)> unit_variance;
};

// Generalized log-determinant of each penalty, cached once per design.
struct PenaltySpectrum {
  std::vector<int> rank;
  std::vector<double> log_pdet;
  int null_space = 0;  // total columns not reached by any penalty

  explicit PenaltySpectrum(const PenalizedDesign& design);
  double log_det(const Eigen::VectorXd& lambda) const;
};

// Laplace-approximate restricted log-likelihood at a converged inner fit:
//   l_p(theta) + 1/2 log|S_lambda|_+ - 1/2 log|H| + M/2 log(2 pi).
// Throws ConvergenceError when H is not positive definite.
double reml_criterion(const PenaltySpectrum& spectrum, const Eigen::VectorXd& lambda, const PirlsFit& fit);
double reml_criterion(const PenalizedDesign& design, const Eigen::VectorXd& lambda, const PirlsFit& fit);

struct SmoothingOptions {
  int starts = 3;
  double start_spread = 2.0;  // offset of the extra starts in log(lambda) units
  double tolerance = 1e-6;
  int max_iterations = 500;
  double log_lambda_bound = 25.0;
  PirlsOptions pirls;
  std::optional<Eigen::VectorXd> initial_log_lambda;
};

struct SmoothingFit {
  Eigen::VectorXd lambda;
  double dispersion = 1.0;
  PirlsFit fit;
  double reml = 0.0;
  Eigen::MatrixXd covariance;  // H^{-1}
  Eigen::VectorXd edf;         // diagonal of the influence map H^{-1} X'WX
  double edf_total = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Inner fit plus criterion at fixed smoothing parameters and dispersion.
SmoothingFit evaluate_smoothing(const SmoothingProblem& problem, const Eigen::VectorXd& lambda, double dispersion,
                                const Eigen::VectorXd* start = nullptr, const PirlsOptions& options = {});

// Outer iteration: Nelder-Mead over log(lambda) (and log dispersion in reml mode), multi-started.
// Throws ConvergenceError when no start converges.
SmoothingFit optimize_smoothing(const SmoothingProblem& problem, const SmoothingOptions& options = {});

// Rule-of-thumb starting values: tr(X_j' W X_j) / tr(S_j) at the starting linear predictor.
Eigen::VectorXd initial_log_lambda(const PenalizedDesign& design, const Likelihood& likelihood);

// Effective degrees of freedom of each term from the diagonal of the influence map.
std::vector<double> term_edf(const PenalizedDesign& design, const Eigen::VectorXd& edf_diagonal);

}  // namespace epi
