#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "epi/likelihood.hpp"
#include "epi/penalized.hpp"
#include "epi/smoothing.hpp"

namespace epi {

// Objective maximized over c: the log-likelihood at the penalized optimum, the penalized
// log-likelihood, or the Laplace-approximate restricted likelihood (random effects integrated out).
enum class ProfileObjective { loglik, penalized, reml };

struct FitOptions {
  FamilyKind family = FamilyKind::negative_binomial;
  SmoothingOptions smoothing;
  bool profile = true;      // estimate c; otherwise use fixed_c
  double fixed_c = 0.5;
  double c_lower = 1e-6;
  double c_upper = 1.0;
  double c_tolerance = 1e-3;
  double curvature_step = 0.02;
  ProfileObjective profile_objective = ProfileObjective::penalized;
  int profile_refinements = 1;  // reselect smoothing parameters at c_hat and profile again
  double initial_dispersion = 1.0;
};

struct ProfilePoint {
  double c = 0.0;
  double value = 0.0;
};

struct ProfileResult {
  double c = 0.0;
  double se = std::numeric_limits<double>::infinity();
  double value = 0.0;
  std::vector<ProfilePoint> points;  // in evaluation order
  bool flat = false;                 // curvature too small for a finite standard error
};

// Design as a function of the autoregressive offset constant c.
using DesignBuilderFn = std::function<PenalizedDesign(double c)>;

// Smoothing problem for a family. The response is copied into the likelihood factory.
SmoothingProblem make_problem(const PenalizedDesign& design, const Eigen::VectorXd& y, FamilyKind family,
                              double dispersion);

// Golden-section maximization over [c_lower, c_upper] of the objective at theta_hat(c). Smoothing
// parameters and dispersion are selected by REML at a pilot c (first c_upper, then c_hat of the previous
// round) and held fixed during each search. The standard error comes from a central second difference
// at the maximum.
ProfileResult profile_c(const DesignBuilderFn& builder, const Eigen::VectorXd& y, const FitOptions& options = {});

struct FitResult {
  FamilyKind family = FamilyKind::negative_binomial;
  std::vector<std::string> names;
  Eigen::VectorXd theta;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd se;
  std::vector<std::string> smooth_labels;  // one per smoothing parameter
  Eigen::VectorXd lambda;
  double dispersion = 1.0;
  double c = 0.0;
  double c_se = std::numeric_limits<double>::infinity();
  bool c_profiled = false;
  std::vector<std::string> term_labels;
  std::vector<double> term_edf;
  double edf_total = 0.0;
  double loglik = 0.0;
  double reml = 0.0;
  bool converged = false;
  std::vector<ProfilePoint> profile;
  Eigen::VectorXd y;
  Eigen::VectorXd mu;

  // Index of a named coefficient; throws when absent.
  Eigen::Index index_of(const std::string& name) const;
};

// Two-stage fit: profile c (unless disabled), then select smoothing parameters at c_hat with the full
// multi-start search.
FitResult fit_model(const DesignBuilderFn& builder, const Eigen::VectorXd& y, const FitOptions& options = {});

// Fit at fixed c without profiling.
FitResult fit_fixed_c(const PenalizedDesign& design, const Eigen::VectorXd& y, double c, const FitOptions& options = {});

// Conditional AIC: -2 loglik + 2 (edf + 1), the extra degree of freedom for the dispersion.
double caic(const FitResult& fit);

}  // namespace epi
