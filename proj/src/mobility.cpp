#include "epi/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "epi/error.hpp"

namespace epi {

double gini_index(const Eigen::Ref<const Eigen::MatrixXd>& colocation, Eigen::Index i) {
  const Eigen::Index n = colocation.rows();
  if (colocation.cols() != n) throw Error("co-location matrix must be square");
  if (n < 3) throw Error("Gini index needs at least three districts");
  std::vector<double> others;
  others.reserve(static_cast<std::size_t>(n - 1));
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != i) {
      const double p = colocation(i, j);
      if (!(p >= 0.0) || !std::isfinite(p)) throw Error("co-location probabilities must be finite and nonnegative");
      others.push_back(p);
    }
  double total = 0.0;
  for (double p : others) total += p;
  if (total <= 0.0) throw Error("degenerate co-location row " + std::to_string(i));

  // sum over ordered pairs |p_m - p_l| = 2 sum_k (2k - m - 1) p_(k) over the sorted values, k = 1..m
  std::sort(others.begin(), others.end());
  const double m = static_cast<double>(others.size());
  double pair_sum = 0.0;
  for (std::size_t k = 0; k < others.size(); ++k) pair_sum += (2.0 * static_cast<double>(k + 1) - m - 1.0) * others[k];
  pair_sum *= 2.0;
  return pair_sum / (2.0 * static_cast<double>(n - 1) * total);
}

Eigen::VectorXd gini_indices(const Eigen::Ref<const Eigen::MatrixXd>& colocation) {
  Eigen::VectorXd out(colocation.rows());
  for (Eigen::Index i = 0; i < colocation.rows(); ++i) out(i) = gini_index(colocation, i);
  return out;
}

FeatureSeries weekly_standardize(const FeatureSeries& series) {
  if (series.standardized) throw Error("series is already standardized");
  const Eigen::Index n = series.values.rows();
  if (n < 2) throw Error("standardization needs at least two districts per week");
  FeatureSeries out{series.kind, true, Eigen::MatrixXd(series.values.rows(), series.values.cols())};
  for (Eigen::Index w = 0; w < series.values.cols(); ++w) {
    const auto col = series.values.col(w);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1));
    if (sd > 0.0 && std::isfinite(sd))
      out.values.col(w) = (col.array() - mean) / sd;
    else
      out.values.col(w).setZero();
  }
  return out;
}

FeatureSeries weekly_average(const std::vector<DailyValue>& daily, std::size_t districts, const WeekCalendar& calendar,
                             FeatureKind kind) {
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(districts, calendar.weeks);
  Eigen::MatrixXi n = Eigen::MatrixXi::Zero(districts, calendar.weeks);
  for (const auto& d : daily) {
    if (!calendar.contains(d.day)) continue;
    if (d.district >= districts) throw Error("daily value for unknown district index " + std::to_string(d.district));
    const int w = calendar.week_of(d.day) - 1;
    sums(d.district, w) += d.value;
    n(d.district, w) += 1;
  }
  for (std::size_t i = 0; i < districts; ++i)
    for (int w = 0; w < calendar.weeks; ++w)
      if (n(i, w) == 0)
        throw Error("no daily observations for district " + std::to_string(i) + " in week " + std::to_string(w + 1));
  return {kind, false, sums.array() / n.cast<double>().array()};
}

}  // namespace epi
