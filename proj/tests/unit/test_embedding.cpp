#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "epi/embedding.hpp"
#include "epi/error.hpp"

using namespace epi;

namespace {

Eigen::MatrixXd random_points(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) x.row(i) << 3.0 * z(rng), z(rng);
  return x;
}

Eigen::MatrixXd pairwise(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  return d;
}

// Smallest eigenvalue of -1/2 J D^2 J, computed from scratch.
double min_gram_eigenvalue(const Eigen::MatrixXd& d) {
  const Eigen::Index n = d.rows();
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  const Eigen::MatrixXd b = -0.5 * j * d.cwiseProduct(d) * j;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b).eigenvalues().minCoeff();
}

Eigen::MatrixXd shifted(const Eigen::MatrixXd& d, double c) {
  Eigen::MatrixXd out = d.array() + c;
  out.diagonal().setZero();
  return out;
}

}  // namespace

TEST_CASE("classical scaling recovers planar distances") {
  const Eigen::MatrixXd x = random_points(20, 3);
  const Eigen::MatrixXd d = pairwise(x);
  const EmbeddingCoordinates e = classical_mds({d, 0.0}, 2);
  CHECK((pairwise(e.points) - d).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(e.points.colwise().mean().norm() < 1e-10);
  CHECK(e.eigenvalues(0) >= e.eigenvalues(1));
  CHECK(e.stress < 1e-10);
}

TEST_CASE("procrustes recovers a similarity transform") {
  const Eigen::MatrixXd x = random_points(15, 5);
  Eigen::Matrix2d a;
  a << 0, -1, 1, 0;  // 90 degrees
  const Eigen::RowVector2d b(3, 4);
  const Eigen::MatrixXd target = ((2.0 * x * a).rowwise() + b).eval();
  const SimilarityTransform t = procrustes_align(x, target);
  CHECK(t.residual < 1e-18);
  CHECK(t.dilation == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(t.translation(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(t.translation(1) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK((t.apply(x) - target).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("procrustes allows reflections") {
  const Eigen::MatrixXd x = random_points(10, 9);
  Eigen::MatrixXd mirrored = x;
  mirrored.col(0) *= -1.0;
  const SimilarityTransform t = procrustes_align(x, mirrored);
  CHECK(t.residual < 1e-20);
  CHECK(t.rotation.determinant() == doctest::Approx(-1.0));
}

TEST_CASE("additive constant agrees with a bisection oracle") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 6 + rep;
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i) {
      d(i, i) = 0.0;
      for (int j = 0; j < i; ++j) d(i, j) = d(j, i) = u(rng);
    }
    const double c = additive_constant({d, 0.0});
    CHECK(c >= 0.0);
    const double scale = d.maxCoeff();
    // Bisection on the sign of the smallest Gram eigenvalue.
    double lo = 0.0, hi = 10.0 * scale;
    if (min_gram_eigenvalue(d) >= -1e-10 * scale * scale) hi = 0.0;
    while (hi - lo > 1e-10 * scale) {
      const double mid = 0.5 * (lo + hi);
      (min_gram_eigenvalue(shifted(d, mid)) >= -1e-12 * scale * scale ? hi : lo) = mid;
    }
    CHECK(c == doctest::Approx(hi).epsilon(1e-6).scale(scale));
    CHECK(min_gram_eigenvalue(shifted(d, c)) > -1e-8 * (scale + c) * (scale + c));
  }
}

TEST_CASE("euclidean distances need no additive constant") {
  const Eigen::MatrixXd d = pairwise(random_points(12, 1));
  CHECK(additive_constant({d, 0.0}) < 1e-8);
}

TEST_CASE("connectedness becomes reciprocal distance") {
  Eigen::MatrixXd sci(3, 3);
  sci << 7, 2, 4, 2, 7, 0.5, 4, 0.5, 7;
  const DistanceMatrix d = connectedness_to_distance(sci);
  CHECK(d.d(0, 1) == doctest::Approx(0.5));
  CHECK(d.d(2, 1) == doctest::Approx(2.0));
  CHECK(d.d(1, 1) == 0.0);
  sci(0, 1) = 0.0;
  CHECK_THROWS_AS(connectedness_to_distance(sci), Error);
}

TEST_CASE("full embedding lands on the geographic frame") {
  const Eigen::MatrixXd geo = random_points(25, 8);
  Eigen::MatrixXd sci(25, 25);
  const Eigen::MatrixXd dist = pairwise(geo);
  for (int i = 0; i < 25; ++i)
    for (int j = 0; j < 25; ++j) sci(i, j) = i == j ? 1.0 : 1.0 / dist(i, j);
  const SocialEmbedding e = embed_connectedness(sci, geo);
  CHECK(e.distances.additive_constant < 1e-6);
  CHECK((e.coordinates - geo).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("equilateral triangle embeds with unit sides") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Ones(3, 3);
  d.diagonal().setZero();
  const EmbeddingCoordinates e = classical_mds({d, 0.0}, 2);
  const Eigen::MatrixXd back = pairwise(e.points);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(std::abs(back(i, j) - 1.0) < 1e-9);
}

TEST_CASE("triangle violation gets the smallest admissible constant") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 3, 1, 0, 1, 3, 1, 0;
  const double c = additive_constant({d, 0.0});
  REQUIRE(c > 0.0);
  CHECK(min_gram_eigenvalue(shifted(d, c)) > -1e-10);
  CHECK(min_gram_eigenvalue(shifted(d, c * (1.0 - 1e-3))) < -1e-10);
}

TEST_CASE("procrustes residual is a minimum") {
  const Eigen::MatrixXd x = random_points(12, 14);
  const Eigen::MatrixXd y = random_points(12, 15);
  const SimilarityTransform best = procrustes_align(x, y);
  CHECK(best.residual == doctest::Approx((best.apply(x) - y).squaredNorm()));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 0.05);
  for (int rep = 0; rep < 10000; ++rep) {
    SimilarityTransform t = best;
    const double angle = z(rng);
    Eigen::Matrix2d r;
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    t.rotation = best.rotation * r;
    t.dilation *= std::exp(z(rng));
    t.translation += Eigen::Vector2d(z(rng), z(rng));
    REQUIRE((t.apply(x) - y).squaredNorm() >= best.residual - 1e-12);
  }
}
