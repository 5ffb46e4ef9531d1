#pragma once

#include <Eigen/Dense>
#include <vector>

#include "epi/dates.hpp"

namespace epi {

enum class FeatureKind { gini, staying_put };

// District x week values; column w is calendar week w+1.
struct FeatureSeries {
  FeatureKind kind = FeatureKind::gini;
  bool standardized = false;
  Eigen::MatrixXd values;
};

// Gini concentration of row `i` of a co-location matrix over all other districts:
//   sum_{m,l != i} |p_im - p_il| / (2 (n-1) sum_{j != i} p_ij).
// The diagonal is ignored. Values lie in [0, (n-2)/(n-1)].
double gini_index(const Eigen::Ref<const Eigen::MatrixXd>& colocation, Eigen::Index i);

// Gini index of every district for one week.
Eigen::VectorXd gini_indices(const Eigen::Ref<const Eigen::MatrixXd>& colocation);

// Per-week centring and scaling by the cross-district sample standard deviation (n-1 divisor).
// Weeks with zero spread map to zeros.
FeatureSeries weekly_standardize(const FeatureSeries& series);

struct DailyValue {
  std::size_t district = 0;
  Date day;
  double value = 0.0;
};

// Arithmetic mean of the available daily values per (district, week). Days outside the
// calendar are ignored; every (district, week) needs at least one observation.
FeatureSeries weekly_average(const std::vector<DailyValue>& daily, std::size_t districts, const WeekCalendar& calendar,
                             FeatureKind kind);

}  // namespace epi
