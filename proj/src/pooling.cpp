#include "epi/pooling.hpp"

#include <cmath>

#include "epi/error.hpp"

namespace epi {

Eigen::Index PooledEstimate::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Eigen::Index>(i);
  throw Error("no pooled coefficient named '" + name + "'");
}

PooledEstimate rubin_pool(const std::vector<std::vector<std::string>>& names, const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& covariances) {
  const int K = static_cast<int>(estimates.size());
  if (K < 2) throw Error("Rubin's rules need at least two imputations");
  if (covariances.size() != estimates.size() || names.size() != estimates.size())
    throw Error("one covariance and one name list per estimate are required");
  const Eigen::Index p = estimates.front().size();
  for (int k = 0; k < K; ++k) {
    if (estimates[k].size() != p || covariances[k].rows() != p || covariances[k].cols() != p)
      throw Error("imputation " + std::to_string(k + 1) + " is not conformable");
    if (names[k] != names.front()) throw Error("coefficient names of imputation " + std::to_string(k + 1) + " do not align");
  }
  PooledEstimate out;
  out.K = K;
  out.names = names.front();
  out.estimate = Eigen::VectorXd::Zero(p);
  out.within = Eigen::MatrixXd::Zero(p, p);
  for (int k = 0; k < K; ++k) {
    out.estimate += estimates[k];
    out.within += covariances[k];
  }
  out.estimate /= K;
  out.within /= K;
  out.between = Eigen::MatrixXd::Zero(p, p);
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd d = estimates[k] - out.estimate;
    out.between += d * d.transpose();
  }
  out.between /= (K - 1);
  out.total = out.within + (1.0 + 1.0 / K) * out.between;
  out.se = out.total.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates, const std::vector<Eigen::MatrixXd>& covariances) {
  std::vector<std::string> labels;
  if (!estimates.empty())
    for (Eigen::Index i = 0; i < estimates.front().size(); ++i) labels.push_back("coef" + std::to_string(i + 1));
  return rubin_pool(std::vector<std::vector<std::string>>(estimates.size(), labels), estimates, covariances);
}

PooledEstimate pool_fits(const std::vector<FitResult>& fits, OffsetPooling offset, const std::vector<std::string>& subset) {
  std::vector<std::vector<std::string>> names;
  std::vector<Eigen::VectorXd> estimates;
  std::vector<Eigen::MatrixXd> covariances;
  for (const auto& fit : fits) {
    std::vector<Eigen::Index> idx;
    std::vector<std::string> labels;
    if (subset.empty()) {
      for (std::size_t i = 0; i < fit.names.size(); ++i) idx.push_back(static_cast<Eigen::Index>(i));
      labels = fit.names;
    } else {
      for (const auto& s : subset) idx.push_back(fit.index_of(s));
      labels = subset;
    }
    const bool with_c = offset == OffsetPooling::pooled && fit.c_profiled;
    const Eigen::Index p = static_cast<Eigen::Index>(idx.size()) + (with_c ? 1 : 0);
    Eigen::VectorXd e(p);
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t a = 0; a < idx.size(); ++a) {
      e(static_cast<Eigen::Index>(a)) = fit.theta(idx[a]);
      for (std::size_t b = 0; b < idx.size(); ++b)
        v(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = fit.covariance(idx[a], idx[b]);
    }
    if (with_c) {
      e(p - 1) = fit.c;
      v(p - 1, p - 1) = std::isfinite(fit.c_se) ? fit.c_se * fit.c_se : 0.0;
      labels.push_back("c");
    }
    names.push_back(std::move(labels));
    estimates.push_back(std::move(e));
    covariances.push_back(std::move(v));
  }
  return rubin_pool(names, estimates, covariances);
}

}  // namespace epi
