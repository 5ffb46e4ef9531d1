#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "epi/model_fit.hpp"

namespace epi {

struct PooledEstimate {
  std::vector<std::string> names;
  Eigen::VectorXd estimate;
  Eigen::MatrixXd within;   // V-bar
  Eigen::MatrixXd between;  // B-bar, divisor K - 1
  Eigen::MatrixXd total;    // V-bar + (1 + 1/K) B-bar
  Eigen::VectorXd se;
  int K = 0;

  Eigen::Index index_of(const std::string& name) const;
};

// Rubin's rules. Every estimate must carry the same names in the same order.
PooledEstimate rubin_pool(const std::vector<std::vector<std::string>>& names, const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& covariances);
// Unnamed variant; coefficients are labelled by position.
PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates, const std::vector<Eigen::MatrixXd>& covariances);

enum class OffsetPooling {
  pooled,  // c is appended as a coefficient with variance se(c)^2
  fixed,   // c left out of the pooled vector
};

// Pools the fits of K imputations, optionally restricted to the named coefficients.
PooledEstimate pool_fits(const std::vector<FitResult>& fits, OffsetPooling offset = OffsetPooling::pooled,
                         const std::vector<std::string>& subset = {});

}  // namespace epi
