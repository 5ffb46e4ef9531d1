#include "epi/embedding.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "epi/error.hpp"

namespace epi {

namespace {

constexpr double kPsdTolerance = 1e-9;
// The refined constant must leave no negative eigenvalue beyond rounding.
constexpr double kStrictPsdTolerance = 1e-13;

bool is_euclidean(const Eigen::MatrixXd& d, double tolerance = kPsdTolerance) {
  return gram_min_relative_eigenvalue(d) >= -tolerance;
}

}  // namespace

Eigen::MatrixXd SimilarityTransform::apply(const Eigen::MatrixXd& points) const {
  Eigen::MatrixXd out = dilation * points * rotation;
  out.rowwise() += translation.transpose();
  return out;
}

DistanceMatrix connectedness_to_distance(const Eigen::MatrixXd& connectedness) {
  const Eigen::Index n = connectedness.rows();
  if (connectedness.cols() != n) throw Error("connectedness matrix must be square");
  DistanceMatrix out{Eigen::MatrixXd::Zero(n, n), 0.0};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double x = connectedness(i, j);
      if (!(x > 0.0) || !std::isfinite(x))
        throw Error("connectedness must be positive for pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      out.d(i, j) = 1.0 / x;
    }
  return out;
}

Eigen::MatrixXd double_centre(const Eigen::MatrixXd& a) {
  const Eigen::VectorXd row_mean = a.rowwise().mean();
  const Eigen::RowVectorXd col_mean = a.colwise().mean();
  const double grand = a.mean();
  Eigen::MatrixXd b = a;
  b.colwise() -= row_mean;
  b.rowwise() -= col_mean;
  b.array() += grand;
  return -0.5 * b;
}

double gram_min_relative_eigenvalue(const Eigen::MatrixXd& d) {
  const Eigen::MatrixXd b = double_centre(d.array().square().matrix());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  return ev.minCoeff() / scale;
}

DistanceMatrix shift_off_diagonal(const DistanceMatrix& distances, double c) {
  DistanceMatrix out = distances;
  out.d.array() += c;
  out.d.diagonal().setZero();
  out.additive_constant += c;
  return out;
}

double additive_constant(const DistanceMatrix& distances) {
  const Eigen::MatrixXd& d = distances.d;
  const Eigen::Index n = d.rows();
  if (is_euclidean(d)) return 0.0;

  // Cailliez: the constant is the largest real eigenvalue of [[0, 2 B(d^2)], [-I, -4 B(d)]].
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  m.topRightCorner(n, n) = 2.0 * double_centre(d.array().square().matrix());
  m.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  m.bottomRightCorner(n, n) = -4.0 * double_centre(d);
  Eigen::EigenSolver<Eigen::MatrixXd> eig(m, false);
  double c = 0.0;
  for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
    const auto z = eig.eigenvalues()(k);
    if (std::abs(z.imag()) <= 1e-9 * std::max(1.0, std::abs(z.real()))) c = std::max(c, z.real());
  }

  // Verification: grow until PSD holds, then bisect down to the smallest passing value.
  double hi = std::max(c, 1e-12);
  const auto passes = [&](double x) { return is_euclidean(shift_off_diagonal(distances, x).d, kStrictPsdTolerance); };
  for (int k = 0; k < 200 && !passes(hi); ++k) hi *= 1.0 + 1e-6 + 1e-3 * k;
  double lo = hi * (1.0 - 1e-2);
  if (passes(lo)) lo = 0.0;
  for (int k = 0; k < 100 && hi - lo > 1e-13 * std::max(1.0, hi); ++k) {
    const double mid = 0.5 * (lo + hi);
    if (passes(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

EmbeddingCoordinates classical_mds(const DistanceMatrix& distances, int p) {
  const Eigen::MatrixXd& d = distances.d;
  const Eigen::Index n = d.rows();
  if (d.cols() != n) throw Error("distance matrix must be square");
  if (p < 1 || p >= n) throw Error("embedding dimension must lie in [1, n)");
  const Eigen::MatrixXd b = double_centre(d.array().square().matrix());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  const auto& values = eig.eigenvalues();  // ascending
  const auto& vectors = eig.eigenvectors();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());

  EmbeddingCoordinates out;
  out.points.resize(n, p);
  out.eigenvalues.resize(p);
  for (int k = 0; k < p; ++k) {
    const Eigen::Index col = n - 1 - k;
    const double lambda = values(col);
    // A zero eigenvalue is admissible for exactly collinear or coincident configurations.
    if (lambda < -kPsdTolerance * scale)
      throw Error("fewer than " + std::to_string(p) +
                  " nonnegative eigenvalues in classical scaling; apply a larger additive constant");
    Eigen::VectorXd v = vectors.col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.eigenvalues(k) = std::max(lambda, 0.0);
    out.points.col(k) = v * std::sqrt(out.eigenvalues(k));
  }
  if (out.eigenvalues(0) <= 0.0) throw Error("no positive eigenvalue in classical scaling");
  out.points.rowwise() -= out.points.colwise().mean();

  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double r = d(i, j) - (out.points.row(i) - out.points.row(j)).norm();
      s += r * r;
    }
  out.stress = std::sqrt(s);
  return out;
}

SimilarityTransform procrustes_align(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target) {
  if (source.rows() != target.rows() || source.cols() != 2 || target.cols() != 2)
    throw Error("Procrustes alignment needs two n x 2 configurations");
  if (source.rows() < 3) throw Error("Procrustes alignment needs at least three points");
  const Eigen::RowVector2d source_mean = source.colwise().mean();
  const Eigen::RowVector2d target_mean = target.colwise().mean();
  const Eigen::MatrixXd xs = source.rowwise() - source_mean;
  const Eigen::MatrixXd ys = target.rowwise() - target_mean;
  const double spread = xs.squaredNorm();
  if (!(spread > 0.0)) throw Error("degenerate source configuration (all points identical)");

  Eigen::JacobiSVD<Eigen::Matrix2d> svd(xs.transpose() * ys, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SimilarityTransform t;
  t.rotation = svd.matrixU() * svd.matrixV().transpose();
  t.dilation = svd.singularValues().sum() / spread;
  t.translation = (target_mean - t.dilation * source_mean * t.rotation).transpose();
  t.residual = (t.apply(source) - target).squaredNorm();
  return t;
}

SocialEmbedding embed_connectedness(const Eigen::MatrixXd& connectedness, const Eigen::MatrixXd& geography) {
  SocialEmbedding out;
  const DistanceMatrix raw = connectedness_to_distance(connectedness);
  out.distances = shift_off_diagonal(raw, additive_constant(raw));
  out.mds = classical_mds(out.distances, 2);
  out.transform = procrustes_align(out.mds.points, geography);
  out.coordinates = out.transform.apply(out.mds.points);
  return out;
}

}  // namespace epi
