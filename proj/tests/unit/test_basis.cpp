#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/constants/constants.hpp>
#include <random>

#include "epi/basis.hpp"
#include "epi/error.hpp"
#include "epi/penalized.hpp"

using namespace epi;

namespace {

// Cox-de Boor recursion on an explicit knot vector.
double cox_de_boor(const Eigen::VectorXd& t, int j, int d, double x) {
  if (d == 0) return (t(j) <= x && x < t(j + 1)) ? 1.0 : 0.0;
  double v = 0.0;
  if (t(j + d) > t(j)) v += (x - t(j)) / (t(j + d) - t(j)) * cox_de_boor(t, j, d - 1, x);
  if (t(j + d + 1) > t(j + 1)) v += (t(j + d + 1) - x) / (t(j + d + 1) - t(j + 1)) * cox_de_boor(t, j + 1, d - 1, x);
  return v;
}

// Gaussian penalized fit of intercept + block at smoothing parameter lambda; returns the fitted values.
Eigen::VectorXd gaussian_fit(const BasisBlock& block, const Eigen::VectorXd& y, double lambda) {
  const Eigen::Index n = y.size();
  DesignBuilder b(n);
  b.add("(Intercept)", Eigen::MatrixXd::Ones(n, 1), {"(Intercept)"});
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < block.cols(); ++j) names.push_back("f." + std::to_string(j));
  b.add("f", block.design, names, block.penalty, block.null_space_dim);
  const PenalizedDesign d = b.build(Eigen::VectorXd::Zero(n));
  const GaussianLikelihood lik(y, 1.0);
  return pirls(d, lik, Eigen::VectorXd::Constant(1, lambda)).eta;
}

}  // namespace

TEST_CASE("B-spline values match the Cox-de Boor recursion") {
  for (int degree : {1, 2, 3}) {
    const PSplineBasis basis(-1.0, 2.0, 9, degree, 2);
    const int k = basis.size();
    const Eigen::VectorXd& t = basis.knots();
    CHECK(t.size() == k + degree + 1);
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(41, -1.0, 1.999);
    const Eigen::MatrixXd b = basis.evaluate(x);
    for (Eigen::Index r = 0; r < x.size(); ++r)
      for (int j = 0; j < k; ++j) CHECK(b(r, j) == doctest::Approx(cox_de_boor(t, j, degree, x(r))).epsilon(1e-12));
  }
}

TEST_CASE("B-splines form a partition of unity and clamp outside the range") {
  const PSplineBasis basis(0.0, 10.0, 12);
  Eigen::VectorXd x(5);
  x << 0.0, 3.3, 9.99, 10.0, 11.0;
  const Eigen::MatrixXd b = basis.evaluate(x);
  for (Eigen::Index r = 0; r < x.size(); ++r) CHECK(b.row(r).sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((b.row(3) - b.row(4)).norm() < 1e-15);
}

TEST_CASE("difference penalty") {
  const Eigen::MatrixXd d = difference_matrix(6, 2);
  CHECK(d.rows() == 4);
  Eigen::RowVectorXd first(6);
  first << 1, -2, 1, 0, 0, 0;
  CHECK((d.row(0) - first).norm() == 0.0);
  const PSplineBasis basis(0.0, 1.0, 10);
  const Eigen::MatrixXd s = basis.penalty();
  // Constant and linear coefficient sequences are not penalized.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(10), ramp = Eigen::VectorXd::LinSpaced(10, 0, 9);
  CHECK((s * ones).norm() < 1e-12);
  CHECK((s * ramp).norm() < 1e-12);
  CHECK(null_space_dimension(s) == 2);
  Eigen::VectorXd sq = ramp.cwiseProduct(ramp);
  CHECK(sq.dot(s * sq) == doctest::Approx(4.0 * 8));  // second differences of i^2 are all 2
}

TEST_CASE("sum-to-zero reparameterization") {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(50, 0.0, 1.0).array().square();
  const BasisBlock raw = pspline_block(x, {SmoothKind::pspline, 8, 3, 2, false});
  const BasisBlock b = pspline_block(x, {SmoothKind::pspline, 8, 3, 2, true});
  CHECK(raw.cols() == 8);
  CHECK(b.cols() == 7);
  CHECK(b.design.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
  CHECK(b.null_space_dim == 1);
  CHECK((raw.design * b.constraint_map - b.design).cwiseAbs().maxCoeff() < 1e-12);
  // A centred linear trend is still representable exactly.
  const Eigen::VectorXd target = (x.array() - x.mean()).matrix();
  const Eigen::VectorXd coef = b.design.colPivHouseholderQr().solve(target);
  CHECK((b.design * coef - target).norm() < 1e-8);
}

TEST_CASE("thin-plate radial function") {
  CHECK(thinplate_radial(0.0) == 0.0);
  const double pi = boost::math::constants::pi<double>();
  CHECK(thinplate_radial(2.0) == doctest::Approx(4.0 * std::log(2.0) / (8.0 * pi)));
}

TEST_CASE("thin-plate block spans affine functions and penalizes bending only") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd xy(40, 2);
  for (int i = 0; i < 40; ++i) xy.row(i) << u(rng), u(rng);
  const BasisBlock b = thinplate_block(xy, {SmoothKind::thinplate, 12, 0, 0, false});
  CHECK(b.cols() == 12);
  CHECK(b.null_space_dim == 3);
  CHECK(null_space_dimension(b.penalty) == 3);
  Eigen::VectorXd affine = 1.0 + 2.0 * xy.col(0).array() - 0.5 * xy.col(1).array();
  const Eigen::VectorXd coef = b.design.colPivHouseholderQr().solve(affine);
  CHECK((b.design * coef - affine).norm() < 1e-10);
  CHECK(coef.dot(b.penalty * coef) < 1e-12);
  const BasisBlock c = thinplate_block(xy, {SmoothKind::thinplate, 12, 0, 0, true});
  CHECK(c.cols() == 11);
  CHECK(c.null_space_dim == 2);
  CHECK(c.design.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
  Eigen::MatrixXd twice = xy;
  twice.row(1) = twice.row(0);
  twice.row(2) = twice.row(0);
  CHECK_THROWS_AS(thinplate_block(twice.topRows(12), {SmoothKind::thinplate, 12, 0, 0, false}), Error);
}

TEST_CASE("thin-plate penalty equals the bending energy by quadrature") {
  // Full rank on six sites: coefficients map back to radial weights delta = E^{-1} X beta.
  Eigen::MatrixXd xy(6, 2);
  xy << 0.1, 0.2, 0.9, 0.1, 0.5, 0.8, 0.3, 0.6, 0.7, 0.5, 0.2, 0.9;
  const BasisBlock b = thinplate_block(xy, {SmoothKind::thinplate, 6, 0, 0, false});
  const double pi = boost::math::constants::pi<double>();
  Eigen::MatrixXd e(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const double r = (xy.row(i) - xy.row(j)).norm();
      e(i, j) = r > 0 ? r * r * std::log(r) / (8.0 * pi) : 0.0;
    }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(6);
  beta.head(3) << 0.7, -1.1, 0.4;
  const Eigen::VectorXd delta = e.fullPivLu().solve(b.design.leftCols(3) * beta.head(3));
  Eigen::MatrixXd t(6, 3);
  t.col(0).setOnes();
  t.rightCols(2) = xy;
  CHECK((t.transpose() * delta).norm() < 1e-10);
  const double quadratic = beta.dot(b.penalty * beta);
  CHECK(quadratic == doctest::Approx(delta.dot(e * delta)).epsilon(1e-9));

  // Second derivatives of r^2 log r / (8 pi).
  auto integrand = [&](double x, double y) {
    double fxx = 0.0, fxy = 0.0, fyy = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double dx = x - xy(i, 0), dy = y - xy(i, 1);
      const double r2 = dx * dx + dy * dy;
      if (r2 == 0.0) continue;
      const double lr = std::log(r2);
      fxx += delta(i) * (lr + 2.0 * dx * dx / r2 + 1.0);
      fxy += delta(i) * (2.0 * dx * dy / r2);
      fyy += delta(i) * (lr + 2.0 * dy * dy / r2 + 1.0);
    }
    const double k = 1.0 / (8.0 * pi);
    return k * k * (fxx * fxx + 2.0 * fxy * fxy + fyy * fyy);
  };
  // Polar coordinates about the centroid; the tail beyond radius R decays like R^-2.
  using boost::math::quadrature::gauss_kronrod;
  const double cx = xy.col(0).mean(), cy = xy.col(1).mean();
  const double R = 400.0;
  auto radial = [&](double theta) {
    auto along = [&](double s) {
      // s in [0, 1] mapped to r = R s^2 concentrates nodes near the sites
      const double r = R * s * s;
      return integrand(cx + r * std::cos(theta), cy + r * std::sin(theta)) * r * 2.0 * R * s;
    };
    return gauss_kronrod<double, 31>::integrate(along, 0.0, 1.0, 12, 1e-9);
  };
  const double energy = gauss_kronrod<double, 31>::integrate(radial, 0.0, 2.0 * pi, 10, 1e-8);
  CHECK(energy == doctest::Approx(quadratic).epsilon(2e-3));
}

TEST_CASE("ridge block") {
  const BasisBlock b = ridge_block({0, 2, 2, 1}, 3, "a");
  CHECK(b.cols() == 3);
  CHECK(b.design(1, 2) == 1.0);
  CHECK(b.design.rowwise().sum().isOnes());
  CHECK(b.penalty.isIdentity());
  CHECK(b.null_space_dim == 0);
  CHECK_THROWS_AS(ridge_block({0, 3}, 3), Error);
}

TEST_CASE("thin-plate fits do not depend on the orientation of the coordinates") {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> z(0.0, 0.1);
  Eigen::MatrixXd xy(60, 2);
  Eigen::VectorXd y(60);
  for (int i = 0; i < 60; ++i) {
    xy.row(i) << u(rng), u(rng);
    y(i) = std::sin(2.0 * xy(i, 0)) * std::cos(xy(i, 1)) + z(rng);
  }
  const SmoothSpec spec{SmoothKind::thinplate, 15, 0, 0, true};
  const Eigen::VectorXd base = gaussian_fit(thinplate_block(xy, spec), y, 0.3);
  for (double angle : {0.4, 2.0, -1.1}) {
    Eigen::Matrix2d r;
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    const Eigen::VectorXd turned = gaussian_fit(thinplate_block(xy * r, spec), y, 0.3);
    CHECK((turned - base).cwiseAbs().maxCoeff() < 1e-8);
  }
  Eigen::MatrixXd mirrored = xy;
  mirrored.col(1) *= -1.0;
  CHECK((gaussian_fit(thinplate_block(mirrored, spec), y, 0.3) - base).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("absorbed constraint equals a Lagrange-multiplier fit") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 80, k = 10;
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = u(rng);
    y(i) = std::exp(x(i)) + 0.2 * u(rng);
  }
  const double lambda = 0.7;
  const BasisBlock raw = pspline_block(x, {SmoothKind::pspline, k, 3, 2, false});
  const Eigen::VectorXd absorbed = gaussian_fit(pspline_block(x, {SmoothKind::pspline, k, 3, 2, true}), y, lambda);

  // KKT system for min |y - a - B beta|^2 + lambda beta' S beta subject to 1' B beta = 0.
  Eigen::MatrixXd x_full(n, k + 1);
  x_full << Eigen::VectorXd::Ones(n), raw.design;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k + 1, k + 1);
  s.bottomRightCorner(k, k) = raw.penalty;
  Eigen::RowVectorXd con = Eigen::RowVectorXd::Zero(k + 1);
  con.tail(k) = raw.design.colwise().sum();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 2, k + 2);
  kkt.topLeftCorner(k + 1, k + 1) = 2.0 * (x_full.transpose() * x_full + lambda * s);
  kkt.block(0, k + 1, k + 1, 1) = con.transpose();
  kkt.block(k + 1, 0, 1, k + 1) = con;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 2);
  rhs.head(k + 1) = 2.0 * x_full.transpose() * y;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  const Eigen::VectorXd lagrange = x_full * sol.head(k + 1);
  CHECK((absorbed - lagrange).cwiseAbs().maxCoeff() < 1e-8);
}
