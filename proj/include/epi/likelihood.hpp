#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

namespace epi {

// Negative-binomial log pmf with mean mu and size phi, Var = mu + mu^2 / phi:
//   log Gamma(phi + y) - log Gamma(phi) - log y! + phi log(phi / (phi + mu)) + y log(mu / (phi + mu)).
double nb_log_pmf(double y, double mu, double phi);
double nb_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi);
// P(Y <= y); zero for y < 0.
double nb_cdf(double y, double mu, double phi);
double poisson_log_pmf(double y, double mu);

enum class FamilyKind { negative_binomial, quasi_poisson, gaussian };

std::string to_string(FamilyKind kind);
FamilyKind parse_family(const std::string& name);

// Observation model expressed through the linear predictor.
class Likelihood {
 public:
  virtual ~Likelihood() = default;

  // Total log-likelihood at eta. When requested, fills d ell / d eta and a strictly positive
  // curvature weight (negative second derivative, or its expectation) per observation.
  virtual double evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* score, Eigen::VectorXd* weight) const = 0;
  virtual Eigen::VectorXd mean(const Eigen::VectorXd& eta) const = 0;
  // Linear predictor used to seed the first penalized least-squares solve.
  virtual Eigen::VectorXd starting_eta() const = 0;
  virtual Eigen::Index size() const = 0;
};

// Log link, NB(mu, phi_l). `phi` is either one value or one per observation.
class NegBinMeanLikelihood final : public Likelihood {
 public:
  NegBinMeanLikelihood(Eigen::VectorXd y, Eigen::VectorXd phi);
  NegBinMeanLikelihood(Eigen::VectorXd y, double phi);
  double evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* score, Eigen::VectorXd* weight) const override;
  Eigen::VectorXd mean(const Eigen::VectorXd& eta) const override;
  Eigen::VectorXd starting_eta() const override;
  Eigen::Index size() const override { return y_.size(); }

 private:
  Eigen::VectorXd y_;
  Eigen::VectorXd phi_;
};

// Scale predictor of the delay model: eta = log sigma with phi = 1/sigma and known means.
class NegBinScaleLikelihood final : public Likelihood {
 public:
  NegBinScaleLikelihood(Eigen::VectorXd y, Eigen::VectorXd mu);
  double evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* score, Eigen::VectorXd* weight) const override;
  Eigen::VectorXd mean(const Eigen::VectorXd& eta) const override;
  Eigen::VectorXd starting_eta() const override;
  Eigen::Index size() const override { return y_.size(); }

 private:
  Eigen::VectorXd y_;
  Eigen::VectorXd mu_;
};

// Quasi-likelihood with Var = phi * mu and log link: sum (y eta - exp(eta)) / phi, up to a
// term free of eta (the saturated value is subtracted so the value is minus deviance / 2 phi).
class QuasiPoissonLikelihood final : public Likelihood {
 public:
  QuasiPoissonLikelihood(Eigen::VectorXd y, double phi);
  double evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* score, Eigen::VectorXd* weight) const override;
  Eigen::VectorXd mean(const Eigen::VectorXd& eta) const override;
  Eigen::VectorXd starting_eta() const override;
  Eigen::Index size() const override { return y_.size(); }

 private:
  Eigen::VectorXd y_;
  double phi_;
};

// Identity link, N(eta, sigma2).
class GaussianLikelihood final : public Likelihood {
 public:
  GaussianLikelihood(Eigen::VectorXd y, double sigma2);
  double evaluate(const Eigen::VectorXd& eta, Eigen::VectorXd* score, Eigen::VectorXd* weight) const override;
  Eigen::VectorXd mean(const Eigen::VectorXd& eta) const override { return eta; }
  Eigen::VectorXd starting_eta() const override { return y_; }
  Eigen::Index size() const override { return y_.size(); }

 private:
  Eigen::VectorXd y_;
  double sigma2_;
};

std::unique_ptr<Likelihood> make_likelihood(FamilyKind kind, const Eigen::VectorXd& y, double dispersion);

// Variance function Var(Y) for the family at mean mu.
double family_variance(FamilyKind kind, double mu, double dispersion);

}  // namespace epi
