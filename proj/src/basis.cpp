#include "epi/basis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "epi/error.hpp"

namespace epi {

int null_space_dimension(const Eigen::MatrixXd& penalty, double tol) {
  if (penalty.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(penalty, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  if (top <= 0.0) return static_cast<int>(penalty.rows());
  int count = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()(i) <= tol * top) ++count;
  return count;
}

Eigen::MatrixXd difference_matrix(int k, int order) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(k, k);
  for (int o = 0; o < order; ++o) {
    const Eigen::Index rows = d.rows() - 1;
    d = (d.bottomRows(rows) - d.topRows(rows)).eval();
  }
  return d;
}

PSplineBasis::PSplineBasis(double lower, double upper, int basis_size, int degree, int difference_order)
    : lower_(lower), upper_(upper), basis_size_(basis_size), degree_(degree), difference_order_(difference_order) {
  if (basis_size < 3) throw Error("P-spline basis needs at least 3 functions");
  if (degree < 1 || basis_size <= degree) throw Error("P-spline basis size must exceed the degree");
  if (difference_order < 0 || difference_order >= basis_size) throw Error("difference order must be below k");
  if (!(upper > lower)) throw Error("P-spline range is empty");
  const int intervals = basis_size - degree;
  const double h = (upper - lower) / intervals;
  knots_.resize(basis_size + degree + 1);
  for (Eigen::Index j = 0; j < knots_.size(); ++j) knots_(j) = lower + (static_cast<double>(j) - degree) * h;
}

Eigen::MatrixXd PSplineBasis::evaluate(const Eigen::VectorXd& x) const {
  const int intervals = basis_size_ - degree_;
  const double h = (upper_ - lower_) / intervals;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.size(), basis_size_);
  std::vector<double> values(static_cast<std::size_t>(degree_ + 1));
  std::vector<double> left(static_cast<std::size_t>(degree_ + 1)), right(static_cast<std::size_t>(degree_ + 1));
  for (Eigen::Index r = 0; r < x.size(); ++r) {
    const double xr = std::clamp(x(r), lower_, upper_);
    int span = static_cast<int>(std::floor((xr - lower_) / h));
    span = std::clamp(span, 0, intervals - 1);
    const int mu = span + degree_;  // knots_(mu) <= xr < knots_(mu + 1)
    // Nonzero basis functions on the span (triangular scheme).
    values[0] = 1.0;
    for (int j = 1; j <= degree_; ++j) {
      left[j] = xr - knots_(mu + 1 - j);
      right[j] = knots_(mu + j) - xr;
      double saved = 0.0;
      for (int s = 0; s < j; ++s) {
        const double temp = values[s] / (right[s + 1] + left[j - s]);
        values[s] = saved + right[s + 1] * temp;
        saved = left[j - s] * temp;
      }
      values[j] = saved;
    }
    for (int j = 0; j <= degree_; ++j) out(r, mu - degree_ + j) = values[j];
  }
  return out;
}

Eigen::MatrixXd PSplineBasis::penalty() const {
  const Eigen::MatrixXd d = difference_matrix(basis_size_, difference_order_);
  return d.transpose() * d;
}

BasisBlock pspline_block(const Eigen::VectorXd& x, const SmoothSpec& spec, const std::string& label) {
  if (spec.kind != SmoothKind::pspline) throw Error("pspline_block needs a pspline spec");
  if (x.size() == 0 || !x.allFinite()) throw Error("P-spline covariate must be finite and non-empty");
  const std::set<double> distinct(x.data(), x.data() + x.size());
  if (static_cast<int>(distinct.size()) < spec.basis_size)
    throw Error("P-spline basis size " + std::to_string(spec.basis_size) + " exceeds the " +
                std::to_string(distinct.size()) + " distinct covariate values");
  const PSplineBasis basis(x.minCoeff(), x.maxCoeff(), spec.basis_size, spec.degree, spec.difference_order);
  BasisBlock block;
  block.label = label;
  block.design = basis.evaluate(x);
  block.penalty = basis.penalty();
  block.null_space_dim = spec.difference_order;
  block.constraint_map = Eigen::MatrixXd::Identity(spec.basis_size, spec.basis_size);
  return spec.sum_to_zero ? absorb_sum_to_zero(block) : block;
}

double thinplate_radial(double r) {
  if (r <= 0.0) return 0.0;
  return r * r * std::log(r) / (8.0 * std::numbers::pi);
}

BasisBlock thinplate_block(const Eigen::MatrixXd& coords, const SmoothSpec& spec, const std::string& label) {
  if (spec.kind != SmoothKind::thinplate) throw Error("thinplate_block needs a thinplate spec");
  if (coords.cols() != 2) throw Error("thin-plate coordinates must have two columns");
  const Eigen::Index n = coords.rows();
  const int k = spec.basis_size;
  if (k < 4) throw Error("thin-plate rank must be at least 4");
  if (n < k) throw Error("thin-plate rank " + std::to_string(k) + " exceeds the " + std::to_string(n) + " data sites");

  Eigen::MatrixXd e(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) e(i, j) = e(j, i) = thinplate_radial((coords.row(i) - coords.row(j)).norm());
  Eigen::MatrixXd t(n, 3);
  t.col(0).setOnes();
  t.rightCols(2) = coords;

  // Eigenvectors of E with the k largest |eigenvalues|; ordering ties broken by index.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(e);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  const auto& ev = eig.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return std::abs(ev(a)) > std::abs(ev(b)); });
  const double top = std::abs(ev(order[0]));
  Eigen::MatrixXd uk(n, k);
  Eigen::VectorXd dk(k);
  for (int j = 0; j < k; ++j) {
    const Eigen::Index idx = order[static_cast<std::size_t>(j)];
    if (std::abs(ev(idx)) <= 1e-10 * top)
      throw Error("thin-plate radial system is rank deficient below rank " + std::to_string(k) +
                  " (coincident points?)");
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    uk.col(j) = v(arg) < 0.0 ? Eigen::VectorXd(-v) : v;
    dk(j) = ev(idx);
  }

  // Side condition T' U_k delta = 0 absorbed through the null space of (U_k' T)'.
  const Eigen::MatrixXd constraint = uk.transpose() * t;  // k x 3
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraint);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
  const Eigen::MatrixXd z = q.rightCols(k - 3);
  const Eigen::VectorXd r_diag = qr.matrixQR().topLeftCorner(3, 3).diagonal();
  if (r_diag.cwiseAbs().minCoeff() <= 1e-10 * r_diag.cwiseAbs().maxCoeff())
    throw Error("thin-plate polynomial side condition is degenerate (collinear sites?)");

  BasisBlock block;
  block.label = label;
  block.design.resize(n, k);
  block.design.leftCols(k - 3) = uk * dk.asDiagonal() * z;
  block.design.rightCols(3) = t;
  block.penalty = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd s = z.transpose() * dk.asDiagonal() * z;
  block.penalty.topLeftCorner(k - 3, k - 3) = 0.5 * (s + s.transpose());
  block.null_space_dim = 3;
  block.constraint_map = Eigen::MatrixXd::Identity(k, k);
  return spec.sum_to_zero ? absorb_sum_to_zero(block) : block;
}

BasisBlock ridge_block(const std::vector<int>& levels, int level_count, const std::string& label) {
  if (level_count < 2) throw Error("ridge block needs at least two levels");
  BasisBlock block;
  block.label = label;
  block.design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(levels.size()), level_count);
  for (std::size_t r = 0; r < levels.size(); ++r) {
    if (levels[r] < 0 || levels[r] >= level_count) throw Error("ridge level out of range");
    block.design(static_cast<Eigen::Index>(r), levels[r]) = 1.0;
  }
  block.penalty = Eigen::MatrixXd::Identity(level_count, level_count);
  block.null_space_dim = 0;
  block.constraint_map = Eigen::MatrixXd::Identity(level_count, level_count);
  return block;
}

BasisBlock absorb_sum_to_zero(const BasisBlock& block) {
  const Eigen::Index p = block.cols();
  if (p < 2) throw Error("sum-to-zero absorption needs at least two columns");
  const Eigen::VectorXd c = block.design.colwise().sum().transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd z = q.rightCols(p - 1);

  BasisBlock out;
  out.label = block.label;
  out.design = block.design * z;
  const Eigen::MatrixXd s = z.transpose() * block.penalty * z;
  out.penalty = 0.5 * (s + s.transpose());
  out.constraint_map = block.constraint_map * z;
  out.null_space_dim = null_space_dimension(out.penalty);
  return out;
}

}  // namespace epi
