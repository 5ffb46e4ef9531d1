#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>
#include <string>
#include <vector>

#include "epi/likelihood.hpp"

namespace epi {

// Contiguous column range of the design. Penalized terms carry one penalty matrix scaled by their own
// smoothing parameter.
struct Term {
  std::string label;
  Eigen::Index first = 0;
  Eigen::Index size = 0;
  Eigen::MatrixXd penalty;  // empty for unpenalized terms
  int null_space_dim = 0;

  bool penalized() const { return penalty.size() > 0; }
};

struct PenalizedDesign {
  Eigen::SparseMatrix<double, Eigen::RowMajor> X;
  Eigen::VectorXd offset;
  std::vector<std::string> names;
  std::vector<Term> terms;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
  std::vector<std::size_t> penalized_terms() const;
  // Throws when the terms do not tile the columns or penalties are malformed.
  void validate() const;
};

// Appends blocks column-wise while recording terms.
class DesignBuilder {
 public:
  explicit DesignBuilder(Eigen::Index rows) : rows_(rows) {}

  // Adds a dense block; zero entries are dropped from the sparse design.
  void add(const std::string& label, const Eigen::MatrixXd& block, const std::vector<std::string>& names,
           const Eigen::MatrixXd& penalty = {}, int null_space_dim = 0);
  // Adds a block given as (row, column-within-block, value) triplets.
  void add_sparse(const std::string& label, Eigen::Index cols, const std::vector<Eigen::Triplet<double>>& entries,
                  const std::vector<std::string>& names, const Eigen::MatrixXd& penalty = {}, int null_space_dim = 0);
  PenalizedDesign build(Eigen::VectorXd offset) const;
  Eigen::Index cols() const { return cols_; }

 private:
  Eigen::Index rows_;
  Eigen::Index cols_ = 0;
  std::vector<Eigen::Triplet<double>> entries_;
  std::vector<std::string> names_;
  std::vector<Term> terms_;
};

// Total penalty matrix sum_j lambda_j S_j embedded in the full coefficient space. `lambda` holds one
// value per penalized term, in term order.
Eigen::MatrixXd total_penalty(const PenalizedDesign& design, const Eigen::VectorXd& lambda);

// l(theta) - 1/2 theta' S_lambda theta.
double penalized_loglik(const PenalizedDesign& design, const Likelihood& likelihood, const Eigen::VectorXd& lambda,
                        const Eigen::VectorXd& theta);
Eigen::VectorXd penalized_gradient(const PenalizedDesign& design, const Likelihood& likelihood,
                                   const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta);

struct PirlsOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;  // relative to 1 + |l_p|
  int max_step_halvings = 40;
  double max_eta_step = 5.0;  // largest change of any linear predictor entry in one Newton step
};

struct PirlsFit {
  Eigen::VectorXd theta;
  Eigen::VectorXd eta;
  double loglik = 0.0;
  double penalized_loglik = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  Eigen::MatrixXd hessian;  // penalized negative Hessian X'WX + S_lambda at theta
  Eigen::MatrixXd xtwx;     // X'WX at theta
  Eigen::VectorXd weights;
};

// Penalized Newton iterations with step halving on the penalized log-likelihood.
// Throws ConvergenceError with the last gradient norm when the iteration limit is reached.
PirlsFit pirls(const PenalizedDesign& design, const Likelihood& likelihood, const Eigen::VectorXd& lambda,
               const Eigen::VectorXd* start = nullptr, const PirlsOptions& options = {});

// X'WX for a sparse design and diagonal weights.
Eigen::MatrixXd weighted_crossprod(const Eigen::SparseMatrix<double, Eigen::RowMajor>& X, const Eigen::VectorXd& w);

}  // namespace epi
