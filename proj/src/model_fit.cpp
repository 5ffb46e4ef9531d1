#include "epi/model_fit.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "epi/error.hpp"
#include "epi/optim.hpp"

namespace epi {

SmoothingProblem make_problem(const PenalizedDesign& design, const Eigen::VectorXd& y, FamilyKind family,
                              double dispersion) {
  SmoothingProblem problem;
  problem.design = &design;
  problem.dispersion = dispersion;
  problem.likelihood = [y, family](double phi) { return make_likelihood(family, y, phi); };
  switch (family) {
    case FamilyKind::negative_binomial:
    case FamilyKind::gaussian: problem.dispersion_mode = DispersionMode::reml; break;
    case FamilyKind::quasi_poisson:
      problem.dispersion_mode = DispersionMode::pearson;
      problem.response = y;
      problem.unit_variance = [](double mu) { return mu; };
      break;
  }
  return problem;
}

namespace {

struct ProfileState {
  std::optional<Eigen::VectorXd> log_lambda;
  double dispersion = 1.0;
};

SmoothingFit fit_at(const PenalizedDesign& design, const Eigen::VectorXd& y, const FitOptions& options,
                    ProfileState& state, int starts) {
  SmoothingProblem problem = make_problem(design, y, options.family, state.dispersion);
  SmoothingOptions smoothing = options.smoothing;
  smoothing.starts = starts;
  if (state.log_lambda) smoothing.initial_log_lambda = state.log_lambda;
  SmoothingFit fit = optimize_smoothing(problem, smoothing);
  state.log_lambda = fit.lambda.array().log().matrix();
  state.dispersion = fit.dispersion;
  return fit;
}

double objective_value(const SmoothingFit& fit, ProfileObjective objective) {
  switch (objective) {
    case ProfileObjective::loglik: return fit.fit.loglik;
    case ProfileObjective::penalized: return fit.fit.penalized_loglik;
    case ProfileObjective::reml: return fit.reml;
  }
  return fit.fit.loglik;
}

}  // namespace

ProfileResult profile_c(const DesignBuilderFn& builder, const Eigen::VectorXd& y, const FitOptions& options) {
  if (!(options.c_lower > 0.0) || !(options.c_upper > options.c_lower)) throw Error("invalid search range for c");
  if (options.profile_refinements < 0) throw Error("profile refinements must be non-negative");
  ProfileState state;
  state.dispersion = options.initial_dispersion;

  // Smoothing parameters and dispersion come from a REML fit at a pilot value and stay fixed while c
  // moves, so the profile is a smooth function of c. Each refinement reselects them at the current c_hat.
  double pilot = std::clamp(options.c_upper, options.c_lower, options.c_upper);
  ProfileResult out;
  for (int round = 0; round <= options.profile_refinements; ++round) {
    fit_at(builder(pilot), y, options, state, options.smoothing.starts);
    const Eigen::VectorXd lambda = state.log_lambda->array().exp().matrix();
    const double dispersion = state.dispersion;
    std::optional<Eigen::VectorXd> theta;
    out = ProfileResult{};
    auto value_at = [&](double c) {
      const PenalizedDesign design = builder(c);
      const SmoothingProblem problem = make_problem(design, y, options.family, dispersion);
      const SmoothingFit fit = evaluate_smoothing(problem, lambda, dispersion, theta ? &*theta : nullptr,
                                                  options.smoothing.pirls);
      theta = fit.fit.theta;
      const double value = objective_value(fit, options.profile_objective);
      out.points.push_back({c, value});
      return value;
    };
    const auto search = golden_section_maximize(value_at, options.c_lower, options.c_upper, options.c_tolerance);
    out.c = search.x;
    out.value = search.value;

    const double h = std::min(options.curvature_step, 0.5 * (options.c_upper - options.c_lower));
    double lo = out.c - h, hi = out.c + h, mid = out.c;
    if (lo < options.c_lower) {
      lo = options.c_lower;
      mid = lo + h;
      hi = lo + 2 * h;
    } else if (hi > options.c_upper) {
      hi = options.c_upper;
      mid = hi - h;
      lo = hi - 2 * h;
    }
    const double f_lo = value_at(lo);
    const double f_hi = value_at(hi);
    const double f_mid = mid == out.c ? out.value : value_at(mid);
    const double curvature = (f_hi - 2.0 * f_mid + f_lo) / (h * h);
    if (curvature < -1e-8) {
      out.se = std::sqrt(-1.0 / curvature);
    } else {
      out.flat = true;
      out.se = std::numeric_limits<double>::infinity();
    }
    if (std::abs(out.c - pilot) <= options.c_tolerance) break;
    pilot = out.c;
  }
  return out;
}

Eigen::Index FitResult::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Eigen::Index>(i);
  throw Error("no coefficient named '" + name + "'");
}

namespace {

FitResult assemble(const PenalizedDesign& design, const Eigen::VectorXd& y, const SmoothingFit& sf,
                   const FitOptions& options) {
  FitResult r;
  r.family = options.family;
  r.names = design.names;
  r.theta = sf.fit.theta;
  r.covariance = sf.covariance;
  r.se = sf.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (const auto j : design.penalized_terms()) r.smooth_labels.push_back(design.terms[j].label);
  r.lambda = sf.lambda;
  r.dispersion = sf.dispersion;
  for (const auto& t : design.terms) r.term_labels.push_back(t.label);
  r.term_edf = term_edf(design, sf.edf);
  r.edf_total = sf.edf_total;
  r.loglik = sf.fit.loglik;
  r.reml = sf.reml;
  r.converged = sf.converged;
  r.y = y;
  r.mu = sf.fit.eta.array().exp();
  if (options.family == FamilyKind::gaussian) r.mu = sf.fit.eta;
  return r;
}

}  // namespace

FitResult fit_fixed_c(const PenalizedDesign& design, const Eigen::VectorXd& y, double c, const FitOptions& options) {
  ProfileState state;
  state.dispersion = options.initial_dispersion;
  const SmoothingFit sf = fit_at(design, y, options, state, options.smoothing.starts);
  FitResult r = assemble(design, y, sf, options);
  r.c = c;
  return r;
}

FitResult fit_model(const DesignBuilderFn& builder, const Eigen::VectorXd& y, const FitOptions& options) {
  if (!options.profile) return fit_fixed_c(builder(options.fixed_c), y, options.fixed_c, options);
  const ProfileResult profile = profile_c(builder, y, options);
  const PenalizedDesign design = builder(profile.c);
  FitResult r = fit_fixed_c(design, y, profile.c, options);
  r.c_se = profile.se;
  r.c_profiled = true;
  r.profile = profile.points;
  return r;
}

double caic(const FitResult& fit) { return -2.0 * fit.loglik + 2.0 * (fit.edf_total + 1.0); }

}  // namespace epi
