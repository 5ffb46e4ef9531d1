#include <doctest.h>

#include <random>

#include "epi/error.hpp"
#include "epi/mobility.hpp"

using namespace epi;

namespace {

// Mean absolute difference over ordered pairs of the off-diagonal entries, divided by twice the mean.
double gini_brute_force(const Eigen::MatrixXd& p, Eigen::Index i) {
  const Eigen::Index n = p.cols();
  std::vector<double> v;
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != i) v.push_back(p(i, j));
  double diff = 0.0, total = 0.0;
  for (double a : v) {
    total += a;
    for (double b : v) diff += std::abs(a - b);
  }
  const double m = static_cast<double>(v.size());
  return diff / (2.0 * m * total);
}

}  // namespace

TEST_CASE("gini matches the double-loop definition") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(3, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = size(rng);
    Eigen::MatrixXd p(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) p(r, c) = unit(rng);
    for (int i = 0; i < n; ++i) CHECK(gini_index(p, i) == doctest::Approx(gini_brute_force(p, i)).epsilon(1e-12));
  }
}

TEST_CASE("gini boundaries") {
  for (int n = 3; n <= 12; ++n) {
    Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    CHECK(std::abs(gini_index(uniform, 0)) < 1e-15);
    Eigen::MatrixXd point = Eigen::MatrixXd::Zero(n, n);
    point(0, 0) = 0.7;  // the diagonal does not count
    point(0, n - 1) = 0.3;
    CHECK(gini_index(point, 0) == doctest::Approx(static_cast<double>(n - 2) / (n - 1)).epsilon(1e-14));
  }
}

TEST_CASE("gini of a row without mobility is an error") {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 4);
  p(0, 0) = 1.0;
  CHECK_THROWS_AS(gini_index(p, 0), Error);
}

TEST_CASE("weekly standardization") {
  FeatureSeries s{FeatureKind::gini, false, Eigen::MatrixXd(4, 2)};
  s.values << 1, 5, 2, 5, 3, 5, 6, 5;
  const FeatureSeries z = weekly_standardize(s);
  CHECK(z.standardized);
  CHECK(std::abs(z.values.col(0).mean()) < 1e-15);
  const double sd = std::sqrt((z.values.col(0).array() - 0.0).square().sum() / 3.0);
  CHECK(sd == doctest::Approx(1.0));
  CHECK(z.values.col(1).isZero());
  // hand value: mean 3, sd sqrt(14/3)
  CHECK(z.values(3, 0) == doctest::Approx(3.0 / std::sqrt(14.0 / 3.0)));
}

TEST_CASE("weekly average of daily values") {
  const WeekCalendar cal{parse_date("2020-03-02"), 2};
  std::vector<DailyValue> daily{{0, parse_date("2020-03-02"), 0.2}, {0, parse_date("2020-03-08"), 0.4},
                                {0, parse_date("2020-03-09"), 0.9}, {1, parse_date("2020-03-03"), 0.5},
                                {1, parse_date("2020-03-12"), 0.1}, {1, parse_date("2020-03-30"), 99.0}};
  const FeatureSeries s = weekly_average(daily, 2, cal, FeatureKind::staying_put);
  CHECK(s.values(0, 0) == doctest::Approx(0.3));
  CHECK(s.values(0, 1) == doctest::Approx(0.9));
  CHECK(s.values(1, 0) == doctest::Approx(0.5));
  CHECK(s.values(1, 1) == doctest::Approx(0.1));
  daily.pop_back();
  daily.erase(daily.begin() + 2);
  CHECK_THROWS_AS(weekly_average(daily, 2, cal, FeatureKind::staying_put), Error);
}

TEST_CASE("hand values") {
  Eigen::MatrixXd p(3, 3);
  p << 0.0, 1.0, 0.0, 0.3, 0.0, 0.7, 0.5, 0.5, 0.0;
  CHECK(gini_index(p, 0) == doctest::Approx(0.5).epsilon(1e-15));

  FeatureSeries s{FeatureKind::staying_put, false, Eigen::MatrixXd(3, 1)};
  s.values << 1, 2, 3;
  CHECK(weekly_standardize(s).values.col(0).isApprox(Eigen::Vector3d(-1, 0, 1)));

  const WeekCalendar cal{parse_date("2020-03-02"), 1};
  const FeatureSeries avg = weekly_average({{0, parse_date("2020-03-03"), 10.0}, {0, parse_date("2020-03-05"), 20.0}}, 1,
                                           cal, FeatureKind::staying_put);
  CHECK(avg.values(0, 0) == 15.0);
}
