#pragma once

#include <Eigen/Dense>

namespace epi {

// Social dissimilarities d_ij = 1 / x_ij with zero diagonal; `additive_constant` is the shift
// already applied to the off-diagonal entries.
struct DistanceMatrix {
  Eigen::MatrixXd d;
  double additive_constant = 0.0;
};

struct EmbeddingCoordinates {
  Eigen::MatrixXd points;       // n x p, column means zero
  Eigen::VectorXd eigenvalues;  // retained, descending
  double stress = 0.0;
};

// Maps x to rho * A^T x + b.
struct SimilarityTransform {
  double dilation = 1.0;
  Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();
  double residual = 0.0;  // sum of squared distances to the target after the transform

  Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
};

DistanceMatrix connectedness_to_distance(const Eigen::MatrixXd& connectedness);

// -1/2 J A J for the centring matrix J.
Eigen::MatrixXd double_centre(const Eigen::MatrixXd& a);

// Smallest c >= 0 such that off-diagonal d_ij + c are Euclidean distances, i.e. the doubly-centred
// Gram matrix of the squared shifted distances is positive semi-definite.
double additive_constant(const DistanceMatrix& distances);

// Returns a copy with `c` added to the off-diagonal entries.
DistanceMatrix shift_off_diagonal(const DistanceMatrix& distances, double c);

// Minimum eigenvalue of the centred Gram matrix, relative to the largest magnitude.
double gram_min_relative_eigenvalue(const Eigen::MatrixXd& d);

// Classical scaling from the top-p eigenpairs. Eigenvector signs are fixed so that the
// largest-magnitude entry is positive.
EmbeddingCoordinates classical_mds(const DistanceMatrix& distances, int p = 2);

// Closed-form Procrustes fit of `source` onto `target` allowing reflections.
SimilarityTransform procrustes_align(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target);

struct SocialEmbedding {
  DistanceMatrix distances;
  EmbeddingCoordinates mds;
  SimilarityTransform transform;
  Eigen::MatrixXd coordinates;  // aligned to the geographic target
};

// Full chain: reciprocal distances, additive constant, classical scaling, alignment to `geography`.
SocialEmbedding embed_connectedness(const Eigen::MatrixXd& connectedness, const Eigen::MatrixXd& geography);

}  // namespace epi
