#include "epi/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <random>

#include "epi/delay.hpp"
#include "epi/error.hpp"
#include "epi/likelihood.hpp"

namespace epi {

ResidualSet rq_residuals(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi, std::uint64_t seed, int draw) {
  if (y.size() != mu.size()) throw Error("residuals: response and fitted means differ in length");
  const boost::math::normal normal;
  std::mt19937_64 rng = substream(seed, static_cast<std::uint64_t>(draw));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ResidualSet out;
  out.seed = seed;
  out.draw = draw;
  const Eigen::Index n = y.size();
  out.residuals.resize(n);
  out.lower.resize(n);
  out.upper.resize(n);
  out.uniform.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lo = nb_cdf(y(i) - 1.0, mu(i), phi);
    const double hi = nb_cdf(y(i), mu(i), phi);
    const double u = lo + unit(rng) * (hi - lo);
    out.lower(i) = lo;
    out.upper(i) = hi;
    out.uniform(i) = u;
    out.residuals(i) = boost::math::quantile(normal, std::clamp(u, 1e-16, 1.0 - 1e-16));
  }
  return out;
}

ResidualSet rq_residuals(const FitResult& fit, std::uint64_t seed, int draw) {
  if (fit.family != FamilyKind::negative_binomial) throw Error("quantile residuals need a negative-binomial fit");
  return rq_residuals(fit.y, fit.mu, fit.dispersion, seed, draw);
}

Rootogram rootogram(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, double phi, int max_count) {
  if (y.size() != mu.size()) throw Error("rootogram: response and fitted means differ in length");
  if (max_count < 0) max_count = y.size() ? static_cast<int>(y.maxCoeff()) : 0;
  Rootogram out;
  out.observed = Eigen::VectorXd::Zero(max_count + 1);
  out.expected = Eigen::VectorXd::Zero(max_count + 1);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const int v = static_cast<int>(y(i));
    if (v >= 0 && v <= max_count) out.observed(v) += 1.0;
    const double q = mu(i) / (phi + mu(i));
    double pmf = std::exp(-phi * std::log1p(mu(i) / phi));
    if (pmf > 1e-280) {
      for (int k = 0; k <= max_count; ++k) {
        out.expected(k) += pmf;
        pmf *= (phi + k) / (k + 1.0) * q;
      }
    } else {
      for (int k = 0; k <= max_count; ++k) out.expected(k) += std::exp(nb_log_pmf(k, mu(i), phi));
    }
  }
  return out;
}

Rootogram rootogram(const FitResult& fit, int max_count) {
  if (fit.family != FamilyKind::negative_binomial) throw Error("rootograms need a negative-binomial fit");
  return rootogram(fit.y, fit.mu, fit.dispersion, max_count);
}

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double denom = std::sqrt((da * da).sum() * (db * db).sum());
  return denom > 0.0 ? (da * db).sum() / denom : 0.0;
}

PredictedObserved predicted_vs_observed(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  if (y.size() != mu.size()) throw Error("observed and predicted values differ in length");
  PredictedObserved out;
  out.observed = y;
  out.predicted = mu;
  out.log_observed = y.array().log1p();
  out.log_predicted = mu.array().log1p();
  out.correlation = pearson_correlation(out.log_observed, out.log_predicted);
  return out;
}

PredictedObserved predicted_vs_observed(const FitResult& fit) { return predicted_vs_observed(fit.y, fit.mu); }

std::vector<QQPoint> normal_qq(const Eigen::VectorXd& residuals, double threshold) {
  if (residuals.size() == 0) throw Error("empty residual set");
  std::vector<double> sorted(residuals.data(), residuals.data() + residuals.size());
  std::sort(sorted.begin(), sorted.end());
  const boost::math::normal normal;
  const double n = static_cast<double>(sorted.size());
  std::vector<QQPoint> out(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    out[i].theoretical = boost::math::quantile(normal, (static_cast<double>(i) + 0.5) / n);
    out[i].sample = sorted[i];
    out[i].outlier = std::abs(out[i].sample - out[i].theoretical) > threshold;
  }
  return out;
}

Rootogram average_rootograms(const std::vector<Rootogram>& rootograms) {
  if (rootograms.empty()) throw Error("no rootograms to average");
  Eigen::Index len = 0;
  for (const auto& r : rootograms) len = std::max(len, r.observed.size());
  Rootogram out;
  out.observed = Eigen::VectorXd::Zero(len);
  out.expected = Eigen::VectorXd::Zero(len);
  for (const auto& r : rootograms) {
    out.observed.head(r.observed.size()) += r.observed;
    out.expected.head(r.expected.size()) += r.expected;
  }
  out.observed /= static_cast<double>(rootograms.size());
  out.expected /= static_cast<double>(rootograms.size());
  return out;
}

std::vector<QQPoint> average_qq(const std::vector<std::vector<QQPoint>>& qq, double threshold) {
  if (qq.empty()) throw Error("no residual sets to average");
  std::vector<QQPoint> out = qq.front();
  for (std::size_t k = 1; k < qq.size(); ++k) {
    if (qq[k].size() != out.size()) throw Error("residual sets differ in length");
    for (std::size_t i = 0; i < out.size(); ++i) out[i].sample += qq[k][i].sample;
  }
  for (auto& p : out) {
    p.sample /= static_cast<double>(qq.size());
    p.outlier = std::abs(p.sample - p.theoretical) > threshold;
  }
  return out;
}

KsResult ks_test_normal(const Eigen::VectorXd& sample) {
  if (sample.size() == 0) throw Error("empty sample");
  std::vector<double> x(sample.data(), sample.data() + sample.size());
  std::sort(x.begin(), x.end());
  const boost::math::normal normal;
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = boost::math::cdf(normal, x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sqn = std::sqrt(n);
  const double lambda = (sqn + 0.12 + 0.11 / sqn) * d;
  // Q_KS(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2)
  double p = 0.0;
  if (lambda < 1e-3) {
    p = 1.0;
  } else {
    double sign = 1.0;
    for (int j = 1; j <= 200; ++j) {
      const double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
      p += term;
      if (std::abs(term) < 1e-16) break;
      sign = -sign;
    }
    p = std::clamp(2.0 * p, 0.0, 1.0);
  }
  return {d, p};
}

}  // namespace epi
