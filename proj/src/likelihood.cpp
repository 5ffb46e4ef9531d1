#include "epi/likelihood.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <numbers>

#include "epi/error.hpp"

namespace epi {

namespace {

// log Gamma(phi + y) - log Gamma(phi) for integer y >= 0.
double log_rising(double phi, double y) {
  if (y < 64.0) {
    double s = 0.0;
    for (int j = 0; j < static_cast<int>(y); ++j) s += std::log(phi + j);
    return s;
  }
  return std::lgamma(phi + y) - std::lgamma(phi);
}

double log_factorial(double y) { return std::lgamma(y + 1.0); }

// sum over j < y of 1 / (phi + j)^2, i.e. trigamma(phi) - trigamma(phi + y).
double trigamma_difference(double phi, double y) {
  if (y < 64.0) {
    double s = 0.0;
    for (int j = 0; j < static_cast<int>(y); ++j) s += 1.0 / ((phi + j) * (phi + j));
    return s;
  }
  return boost::math::trigamma(phi) - boost::math::trigamma(phi + y);
}

// digamma(phi + y) - digamma(phi).
double digamma_difference(double phi, double y) {
  if (y < 64.0) {
    double s = 0.0;
    for (int j = 0; j < static_cast<int>(y); ++j) s += 1.0 / (phi + j);
    return s;
  }
  return boost::math::digamma(phi + y) - boost::math::digamma(phi);
}

}  // namespace

double nb_log_pmf(double y, double mu, double phi) {
  if (!std::isfinite(mu)) throw Error("non-finite negative-binomial mean");
  if (y < 0.0) return -std::numeric_limits<double>::infinity();
  const double log_ratio = std::log1p(mu / phi);  // log((phi + mu) / phi)
  double value = log_rising(phi, y) - log_factorial(y) - phi * log_ratio;
  if (y > 0.0) value += y * (std::log(mu) - std::log(phi + mu));
  return value;
}

double nb_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi) {
  if (y.size() != mu.size()) throw Error("nb_loglik: size mismatch");
  if (!(phi > 0.0)) throw Error("nb_loglik: dispersion must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(mu(i))) throw Error("nb_loglik: non-finite mean at observation " + std::to_string(i));
    total += nb_log_pmf(y(i), mu(i), phi);
  }
  return total;
}

double nb_cdf(double y, double mu, double phi) {
  if (y < 0.0) return 0.0;
  // Recurrence pmf(j+1) = pmf(j) * (phi + j) / (j + 1) * mu / (phi + mu).
  const double q = mu / (phi + mu);
  double log_p0 = -phi * std::log1p(mu / phi);
  double term = std::exp(log_p0);
  if (term == 0.0) {
    // Underflow at zero; fall back to per-term log evaluation.
    double s = 0.0;
    for (int j = 0; j <= static_cast<int>(y); ++j) s += std::exp(nb_log_pmf(j, mu, phi));
    return std::min(1.0, s);
  }
  double s = term;
  for (int j = 0; j < static_cast<int>(y); ++j) {
    term *= (phi + j) / (j + 1.0) * q;
    s += term;
  }
  return std::min(1.0, s);
}

double poisson_log_pmf(double y, double mu) {
  if (y < 0.0) return -std::numeric_limits<double>::infinity();
  if (y == 0.0) return -mu;
  return y * std::log(mu) - mu - log_factorial(y);
}

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::negative_binomial: return "negative_binomial";
    case FamilyKind::quasi_poisson: return "quasi";
    case FamilyKind::gaussian: return "gaussian";
  }
  return "unknown";
}

FamilyKind parse_family(const std::string& name) {
  if (name == "negative_binomial" || name == "nb") return FamilyKind::negative_binomial;
  if (name == "quasi" || name == "quasi_poisson") return FamilyKind::quasi_poisson;
  if (name == "gaussian") return FamilyKind::gaussian;
  throw Error("unknown family '" + name + "'");
}

NegBinMeanLikelihood::NegBinMeanLikelihood(Eigen::VectorXd y, Eigen::VectorXd phi) : y_(std::move(y)), phi_(std::move(phi)) {
  if (phi_.size() != y_.size()) throw Error("per-observation dispersion has the wrong length");
  if (!(phi_.array() > 0.0).all()) throw Error("negative-binomial dispersion must be positive");
}

NegBinMeanLikelihood::NegBinMeanLikelihood(Eigen::VectorXd y, double phi)
    : NegBinMeanLikelihood(y, Eigen::VectorXd::Constant(y.size(), phi)) {}

double NegBinMeanLikelihood::evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* score, Eigen::VectorXd* weight) const {
  if (score) score->resize(y_.size());
  if (weight) weight->resize(y_.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    const double mu = std::exp(eta(i));
    const double phi = phi_(i);
    const double y = y_(i);
    if (!std::isfinite(mu) || mu <= 0.0) return -std::numeric_limits<double>::infinity();
    total += log_rising(phi, y) - log_factorial(y) - phi * std::log1p(mu / phi) + (y > 0.0 ? y * (eta(i) - std::log(phi + mu)) : 0.0);
    if (score) (*score)(i) = phi * (y - mu) / (phi + mu);
    // observed curvature phi mu (y + phi) / (phi + mu)^2 is positive for y >= 0
    if (weight) (*weight)(i) = phi * mu * (y + phi) / ((phi + mu) * (phi + mu));
  }
  return total;
}

Eigen::VectorXd NegBinMeanLikelihood::mean(const Eigen::VectorXd& eta) const { return eta.array().exp(); }

Eigen::VectorXd NegBinMeanLikelihood::starting_eta() const { return (y_.array() + 0.5).log(); }

NegBinScaleLikelihood::NegBinScaleLikelihood(Eigen::VectorXd y, Eigen::VectorXd mu) : y_(std::move(y)), mu_(std::move(mu)) {
  if (mu_.size() != y_.size()) throw Error("scale likelihood: size mismatch");
}

double NegBinScaleLikelihood::evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* score, Eigen::VectorXd* weight) const {
  if (score) score->resize(y_.size());
  if (weight) weight->resize(y_.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    const double phi = std::exp(-eta(i));
    const double mu = mu_(i);
    const double y = y_(i);
    if (!std::isfinite(phi) || phi <= 0.0) return -std::numeric_limits<double>::infinity();
    total += nb_log_pmf(y, mu, phi);
    if (!score && !weight) continue;
    // derivatives in phi, then chain rule with d phi / d eta = -phi
    const double d1 = digamma_difference(phi, y) - std::log1p(mu / phi) + (mu - y) / (phi + mu);
    const double d2 = -trigamma_difference(phi, y) + 1.0 / phi - 1.0 / (phi + mu) - (mu - y) / ((phi + mu) * (phi + mu));
    const double g = -phi * d1;
    if (score) (*score)(i) = g;
    if (weight) {
      const double observed = -(phi * phi * d2 + phi * d1);
      (*weight)(i) = observed > 1e-10 ? observed : std::max(g * g, 1e-10);
    }
  }
  return total;
}

Eigen::VectorXd NegBinScaleLikelihood::mean(const Eigen::VectorXd& eta) const { return eta.array().exp(); }

Eigen::VectorXd NegBinScaleLikelihood::starting_eta() const { return Eigen::VectorXd::Zero(y_.size()); }

QuasiPoissonLikelihood::QuasiPoissonLikelihood(Eigen::VectorXd y, double phi) : y_(std::move(y)), phi_(phi) {
  if (!(phi_ > 0.0)) throw Error("quasi dispersion must be positive");
}

double QuasiPoissonLikelihood::evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* score, Eigen::VectorXd* weight) const {
  if (score) score->resize(y_.size());
  if (weight) weight->resize(y_.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    const double mu = std::exp(eta(i));
    const double y = y_(i);
    if (!std::isfinite(mu)) return -std::numeric_limits<double>::infinity();
    const double saturated = y > 0.0 ? y * std::log(y) - y : 0.0;
    total += (y * eta(i) - mu - saturated) / phi_;
    if (score) (*score)(i) = (y - mu) / phi_;
    if (weight) (*weight)(i) = mu / phi_;
  }
  return total;
}

Eigen::VectorXd QuasiPoissonLikelihood::mean(const Eigen::VectorXd& eta) const { return eta.array().exp(); }

Eigen::VectorXd QuasiPoissonLikelihood::starting_eta() const { return (y_.array() + 0.5).log(); }

GaussianLikelihood::GaussianLikelihood(Eigen::VectorXd y, double sigma2) : y_(std::move(y)), sigma2_(sigma2) {
  if (!(sigma2_ > 0.0)) throw Error("Gaussian variance must be positive");
}

double GaussianLikelihood::evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* score, Eigen::VectorXd* weight) const {
  const Eigen::VectorXd r = y_ - eta;
  if (score) *score = r / sigma2_;
  if (weight) *weight = Eigen::VectorXd::Constant(y_.size(), 1.0 / sigma2_);
  const double n = static_cast<double>(y_.size());
  return -0.5 * r.squaredNorm() / sigma2_ - 0.5 * n * std::log(2.0 * std::numbers::pi * sigma2_);
}

std::unique_ptr<Likelihood> make_likelihood(FamilyKind kind, const Eigen::VectorXd& y, double dispersion) {
  switch (kind) {
    case FamilyKind::negative_binomial: return std::make_unique<NegBinMeanLikelihood>(y, dispersion);
    case FamilyKind::quasi_poisson: return std::make_unique<QuasiPoissonLikelihood>(y, dispersion);
    case FamilyKind::gaussian: return std::make_unique<GaussianLikelihood>(y, dispersion);
  }
  throw Error("unknown family");
}

double family_variance(FamilyKind kind, double mu, double dispersion) {
  switch (kind) {
    case FamilyKind::negative_binomial: return mu + mu * mu / dispersion;
    case FamilyKind::quasi_poisson: return mu * dispersion;
    case FamilyKind::gaussian: return dispersion;
  }
  return 0.0;
}

}  // namespace epi
