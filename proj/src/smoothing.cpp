#include "epi/smoothing.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>

#include "epi/error.hpp"
#include "epi/optim.hpp"

namespace epi {

PenaltySpectrum::PenaltySpectrum(const PenalizedDesign& design) {
  Eigen::Index reached = 0;
  for (const auto j : design.penalized_terms()) {
    const Term& t = design.terms[j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t.penalty, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    int r = 0;
    double ld = 0.0;
    for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
      const double v = eig.eigenvalues()(k);
      if (v > 1e-9 * top) {
        ++r;
        ld += std::log(v);
      }
    }
    rank.push_back(r);
    log_pdet.push_back(ld);
    reached += r;
  }
  null_space = static_cast<int>(design.cols() - reached);
}

double PenaltySpectrum::log_det(const Eigen::VectorXd& lambda) const {
  double total = 0.0;
  for (std::size_t k = 0; k < rank.size(); ++k)
    total += rank[k] * std::log(lambda(static_cast<Eigen::Index>(k))) + log_pdet[k];
  return total;
}

double reml_criterion(const PenaltySpectrum& spectrum, const Eigen::VectorXd& lambda, const PirlsFit& fit) {
  Eigen::LLT<Eigen::MatrixXd> llt(fit.hessian);
  if (llt.info() != Eigen::Success) throw ConvergenceError("penalized Hessian is indefinite at the inner optimum");
  const double log_det_h = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return fit.penalized_loglik + 0.5 * spectrum.log_det(lambda) - 0.5 * log_det_h +
         0.5 * spectrum.null_space * std::log(2.0 * std::numbers::pi);
}

double reml_criterion(const PenalizedDesign& design, const Eigen::VectorXd& lambda, const PirlsFit& fit) {
  return reml_criterion(PenaltySpectrum(design), lambda, fit);
}

Eigen::VectorXd initial_log_lambda(const PenalizedDesign& design, const Likelihood& likelihood) {
  Eigen::VectorXd weight;
  likelihood.evaluate(likelihood.starting_eta(), nullptr, &weight);
  const Eigen::MatrixXd xtwx = weighted_crossprod(design.X, weight);
  const auto penalized = design.penalized_terms();
  Eigen::VectorXd out(static_cast<Eigen::Index>(penalized.size()));
  for (std::size_t k = 0; k < penalized.size(); ++k) {
    const Term& t = design.terms[penalized[k]];
    const double num = xtwx.block(t.first, t.first, t.size, t.size).trace();
    const double den = t.penalty.trace();
    out(static_cast<Eigen::Index>(k)) = std::log(std::max(num, 1e-8) / std::max(den, 1e-12));
  }
  return out;
}

std::vector<double> term_edf(const PenalizedDesign& design, const Eigen::VectorXd& edf_diagonal) {
  std::vector<double> out;
  for (const auto& t : design.terms) out.push_back(edf_diagonal.segment(t.first, t.size).sum());
  return out;
}

namespace {

void finalize(const PenalizedDesign& design, SmoothingFit& out) {
  Eigen::LLT<Eigen::MatrixXd> llt(out.fit.hessian);
  if (llt.info() != Eigen::Success) throw ConvergenceError("penalized Hessian is indefinite at the optimum");
  out.covariance = llt.solve(Eigen::MatrixXd::Identity(design.cols(), design.cols()));
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.edf = (out.covariance * out.fit.xtwx).diagonal();
  out.edf_total = out.edf.sum();
}

double pearson_dispersion(const SmoothingProblem& problem, const PirlsFit& fit, double edf_total,
                          const Likelihood& likelihood) {
  const Eigen::VectorXd mu = likelihood.mean(fit.eta);
  double chi2 = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double r = problem.response(i) - mu(i);
    chi2 += r * r / problem.unit_variance(mu(i));
  }
  const double dof = std::max(1.0, static_cast<double>(mu.size()) - edf_total);
  return std::max(chi2 / dof, 1e-8);
}

}  // namespace

SmoothingFit evaluate_smoothing(const SmoothingProblem& problem, const Eigen::VectorXd& lambda, double dispersion,
                                const Eigen::VectorXd* start, const PirlsOptions& options) {
  const auto likelihood = problem.likelihood(dispersion);
  SmoothingFit out;
  out.lambda = lambda;
  out.dispersion = dispersion;
  out.fit = pirls(*problem.design, *likelihood, lambda, start, options);
  out.reml = reml_criterion(*problem.design, lambda, out.fit);
  out.evaluations = 1;
  out.converged = true;
  finalize(*problem.design, out);
  return out;
}

SmoothingFit optimize_smoothing(const SmoothingProblem& problem, const SmoothingOptions& options) {
  if (!problem.design) throw Error("smoothing problem has no design");
  const PenalizedDesign& design = *problem.design;
  const PenaltySpectrum spectrum(design);
  const Eigen::Index m = static_cast<Eigen::Index>(design.penalized_terms().size());
  const bool scale_in_outer = problem.dispersion_mode == DispersionMode::reml;
  const Eigen::Index dim = m + (scale_in_outer ? 1 : 0);
  if (problem.dispersion_mode == DispersionMode::pearson && (problem.response.size() != design.rows() || !problem.unit_variance))
    throw Error("pearson dispersion needs the response and a variance function");

  double dispersion = problem.dispersion;
  Eigen::VectorXd rho0;
  {
    const auto lik = problem.likelihood(dispersion);
    rho0 = options.initial_log_lambda ? *options.initial_log_lambda : initial_log_lambda(design, *lik);
  }
  const double bound = options.log_lambda_bound;

  Eigen::VectorXd warm;  // last inner solution, used to seed the next evaluation
  int evaluations = 0;
  std::string last_error;
  auto criterion = [&](const Eigen::VectorXd& x, double fixed_dispersion) -> double {
    ++evaluations;
    Eigen::VectorXd lambda(m);
    for (Eigen::Index k = 0; k < m; ++k) lambda(k) = std::exp(std::clamp(x(k), -bound, bound));
    const double disp = scale_in_outer ? std::exp(std::clamp(x(m), -30.0, 30.0)) : fixed_dispersion;
    try {
      const auto lik = problem.likelihood(disp);
      const PirlsFit fit = pirls(design, *lik, lambda, warm.size() ? &warm : nullptr, options.pirls);
      warm = fit.theta;
      const double value = reml_criterion(spectrum, lambda, fit);
      // Quadratic wall outside the admissible box keeps the simplex from drifting.
      double wall = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) wall += std::pow(std::max(0.0, std::abs(x(k)) - bound), 2);
      return -value + wall;
    } catch (const ConvergenceError& e) {
      last_error = e.what();
      return std::numeric_limits<double>::infinity();
    }
  };

  auto run_starts = [&](const Eigen::VectorXd& base, double fixed_dispersion, int starts) {
    NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    for (int s = 0; s < starts; ++s) {
      Eigen::VectorXd x0 = base;
      const double shift = s == 0 ? 0.0 : (s % 2 == 1 ? 1.0 : -1.0) * options.start_spread * ((s + 1) / 2);
      x0.head(m).array() += shift;
      warm.resize(0);
      NelderMeadOptions nm;
      nm.tolerance = options.tolerance;
      nm.max_iterations = options.max_iterations;
      const auto r = nelder_mead([&](const Eigen::VectorXd& x) { return criterion(x, fixed_dispersion); }, x0, nm);
      if (r.value < best.value || (s == 0 && !std::isfinite(best.value))) best = r;
    }
    return best;
  };

  NelderMeadResult best;
  if (problem.dispersion_mode == DispersionMode::pearson) {
    Eigen::VectorXd x = rho0;
    int starts = options.starts;
    for (int round = 0; round < 50; ++round) {
      best = run_starts(x, dispersion, starts);
      if (!std::isfinite(best.value)) break;
      x = best.x;
      starts = 1;
      Eigen::VectorXd lambda = x.array().min(bound).max(-bound).exp();
      const auto fit = evaluate_smoothing(problem, lambda, dispersion, nullptr, options.pirls);
      const auto lik = problem.likelihood(dispersion);
      const double updated = pearson_dispersion(problem, fit.fit, fit.edf_total, *lik);
      const double change = std::abs(updated - dispersion) / dispersion;
      dispersion = updated;
      if (change < 1e-6) break;
    }
  } else {
    Eigen::VectorXd x0(dim);
    x0.head(m) = rho0;
    if (scale_in_outer) x0(m) = std::log(dispersion);
    best = run_starts(x0, dispersion, std::max(1, options.starts));
  }
  if (!std::isfinite(best.value)) throw ConvergenceError("smoothing parameter search failed: " + last_error);

  Eigen::VectorXd lambda(m);
  for (Eigen::Index k = 0; k < m; ++k) lambda(k) = std::exp(std::clamp(best.x(k), -bound, bound));
  if (scale_in_outer) dispersion = std::exp(std::clamp(best.x(m), -30.0, 30.0));
  SmoothingFit out = evaluate_smoothing(problem, lambda, dispersion, nullptr, options.pirls);
  out.evaluations = evaluations + 1;
  out.converged = best.converged;
  return out;
}

}  // namespace epi
