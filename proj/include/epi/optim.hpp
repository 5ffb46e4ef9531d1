#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace epi {

struct NelderMeadOptions {
  double initial_step = 1.0;
  double tolerance = 1e-6;  // spread of function values across the simplex, relative to 1 + |f_best|
  int max_iterations = 500;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Derivative-free minimization (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& start,
                             const NelderMeadOptions& options = {});

struct GoldenSectionResult {
  double x = 0.0;
  double value = 0.0;
  std::vector<std::pair<double, double>> evaluations;  // (x, f(x)) in evaluation order
};

// Maximizes a unimodal f on [lower, upper] until the bracket is narrower than tol. The endpoints are
// evaluated too, so a boundary maximum is returned when it beats the interior.
GoldenSectionResult golden_section_maximize(const std::function<double(double)>& f, double lower, double upper,
                                            double tol);

}  // namespace epi
