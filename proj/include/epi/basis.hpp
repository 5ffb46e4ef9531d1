#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace epi {

enum class SmoothKind { pspline, thinplate, ridge };

struct SmoothSpec {
  SmoothKind kind = SmoothKind::pspline;
  int basis_size = 20;        // k
  int degree = 3;             // pspline only
  int difference_order = 2;   // pspline only
  bool sum_to_zero = true;
};

// Design columns with their quadratic penalty for one model term.
struct BasisBlock {
  std::string label;
  Eigen::MatrixXd design;
  Eigen::MatrixXd penalty;
  int null_space_dim = 0;
  // Maps block coefficients back to the unconstrained basis: beta_raw = constraint_map * beta.
  Eigen::MatrixXd constraint_map;

  Eigen::Index cols() const { return design.cols(); }
};

// Number of eigenvalues of a symmetric PSD matrix at or below tol * (largest eigenvalue).
int null_space_dimension(const Eigen::MatrixXd& penalty, double tol = 1e-9);

// Cubic (by default) B-splines on equally spaced knots over a fixed range with a difference penalty.
class PSplineBasis {
 public:
  PSplineBasis(double lower, double upper, int basis_size, int degree = 3, int difference_order = 2);

  int size() const { return basis_size_; }
  // Basis values at x; points outside [lower, upper] are clamped to the boundary.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd penalty() const;
  const Eigen::VectorXd& knots() const { return knots_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int degree() const { return degree_; }
  int difference_order() const { return difference_order_; }

 private:
  double lower_;
  double upper_;
  int basis_size_;
  int degree_;
  int difference_order_;
  Eigen::VectorXd knots_;
};

// Order-d difference matrix with k columns.
Eigen::MatrixXd difference_matrix(int k, int order);

BasisBlock pspline_block(const Eigen::VectorXd& x, const SmoothSpec& spec, const std::string& label = "pspline");

// Low-rank thin-plate regression spline (d = 2, second-order penalty) evaluated at the data sites.
// Radial functions eta(r) = r^2 log(r) / (8 pi) are reduced to the `basis_size` eigenvectors of largest
// eigenvalue magnitude; the affine part 1, x1, x2 is unpenalized.
BasisBlock thinplate_block(const Eigen::MatrixXd& coords, const SmoothSpec& spec, const std::string& label = "tps");

// Thin-plate radial function for d = 2, m = 2.
double thinplate_radial(double r);

// One indicator column per level 0..levels-1 with an identity penalty.
BasisBlock ridge_block(const std::vector<int>& levels, int level_count, const std::string& label = "ridge");

// Reparameterizes the block so that the column sums of every representable function are zero.
BasisBlock absorb_sum_to_zero(const BasisBlock& block);

}  // namespace epi
