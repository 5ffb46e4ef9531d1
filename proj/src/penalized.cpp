#include "epi/penalized.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <sstream>

#include "epi/error.hpp"

namespace epi {

std::vector<std::size_t> PenalizedDesign::penalized_terms() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < terms.size(); ++j)
    if (terms[j].penalized()) out.push_back(j);
  return out;
}

void PenalizedDesign::validate() const {
  Eigen::Index next = 0;
  for (const auto& t : terms) {
    if (t.first != next) throw Error("terms do not tile the design at term '" + t.label + "'");
    if (t.penalized() && (t.penalty.rows() != t.size || t.penalty.cols() != t.size))
      throw Error("penalty of term '" + t.label + "' has the wrong shape");
    next += t.size;
  }
  if (next != X.cols()) throw Error("terms cover " + std::to_string(next) + " of " + std::to_string(X.cols()) + " columns");
  if (offset.size() != X.rows()) throw Error("offset length does not match the design");
  if (static_cast<Eigen::Index>(names.size()) != X.cols()) throw Error("column names do not match the design");
}

void DesignBuilder::add(const std::string& label, const Eigen::MatrixXd& block, const std::vector<std::string>& names,
                        const Eigen::MatrixXd& penalty, int null_space_dim) {
  if (block.rows() != rows_) throw Error("block '" + label + "' has the wrong row count");
  std::vector<Eigen::Triplet<double>> entries;
  for (Eigen::Index c = 0; c < block.cols(); ++c)
    for (Eigen::Index r = 0; r < block.rows(); ++r)
      if (block(r, c) != 0.0) entries.emplace_back(r, c, block(r, c));
  add_sparse(label, block.cols(), entries, names, penalty, null_space_dim);
}

void DesignBuilder::add_sparse(const std::string& label, Eigen::Index cols,
                               const std::vector<Eigen::Triplet<double>>& entries, const std::vector<std::string>& names,
                               const Eigen::MatrixXd& penalty, int null_space_dim) {
  if (static_cast<Eigen::Index>(names.size()) != cols) throw Error("block '" + label + "' needs one name per column");
  for (const auto& e : entries) {
    if (e.row() < 0 || e.row() >= rows_ || e.col() < 0 || e.col() >= cols) throw Error("entry outside block '" + label + "'");
    entries_.emplace_back(e.row(), e.col() + cols_, e.value());
  }
  names_.insert(names_.end(), names.begin(), names.end());
  terms_.push_back({label, cols_, cols, penalty, null_space_dim});
  cols_ += cols;
}

PenalizedDesign DesignBuilder::build(Eigen::VectorXd offset) const {
  PenalizedDesign d;
  d.X.resize(rows_, cols_);
  d.X.setFromTriplets(entries_.begin(), entries_.end());
  d.X.makeCompressed();
  d.offset = std::move(offset);
  d.names = names_;
  d.terms = terms_;
  d.validate();
  return d;
}

Eigen::MatrixXd total_penalty(const PenalizedDesign& design, const Eigen::VectorXd& lambda) {
  const auto penalized = design.penalized_terms();
  if (static_cast<Eigen::Index>(penalized.size()) != lambda.size())
    throw Error("expected " + std::to_string(penalized.size()) + " smoothing parameters, got " +
                std::to_string(lambda.size()));
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(design.cols(), design.cols());
  for (std::size_t k = 0; k < penalized.size(); ++k) {
    const Term& t = design.terms[penalized[k]];
    s.block(t.first, t.first, t.size, t.size) = lambda(static_cast<Eigen::Index>(k)) * t.penalty;
  }
  return s;
}

Eigen::MatrixXd weighted_crossprod(const Eigen::SparseMatrix<double, Eigen::RowMajor>& X, const Eigen::VectorXd& w) {
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
  const int* outer = X.outerIndexPtr();
  const int* inner = X.innerIndexPtr();
  const double* values = X.valuePtr();
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double wr = w(r);
    for (int a = outer[r]; a < outer[r + 1]; ++a) {
      const double va = wr * values[a];
      const int ca = inner[a];
      double* column = out.col(ca).data();
      // lower triangle: rows >= ca, inner indices are sorted ascending
      for (int b = a; b < outer[r + 1]; ++b) column[inner[b]] += va * values[b];
    }
  }
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose().eval();
  return out;
}

double penalized_loglik(const PenalizedDesign& design, const Likelihood& likelihood, const Eigen::VectorXd& lambda,
                        const Eigen::VectorXd& theta) {
  const Eigen::VectorXd eta = design.X * theta + design.offset;
  const Eigen::MatrixXd s = total_penalty(design, lambda);
  return likelihood.evaluate(eta, nullptr, nullptr) - 0.5 * theta.dot(s * theta);
}

Eigen::VectorXd penalized_gradient(const PenalizedDesign& design, const Likelihood& likelihood,
                                   const Eigen::VectorXd& lambda, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd eta = design.X * theta + design.offset;
  Eigen::VectorXd score;
  likelihood.evaluate(eta, &score, nullptr);
  return design.X.transpose() * score - total_penalty(design, lambda) * theta;
}

namespace {

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& h, const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  // Nearly singular: regularize the diagonal relative to its scale.
  const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  for (double jitter = 1e-12; jitter < 1e-2; jitter *= 100.0) {
    Eigen::MatrixXd hj = h;
    hj.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> l2(hj);
    if (l2.info() == Eigen::Success) return l2.solve(rhs);
  }
  throw ConvergenceError("penalized Hessian is not positive definite");
}

}  // namespace

PirlsFit pirls(const PenalizedDesign& design, const Likelihood& likelihood, const Eigen::VectorXd& lambda,
               const Eigen::VectorXd* start, const PirlsOptions& options) {
  if (likelihood.size() != design.rows()) throw Error("likelihood and design disagree on the number of observations");
  const Eigen::MatrixXd s = total_penalty(design, lambda);
  const Eigen::Index p = design.cols();

  Eigen::VectorXd theta;
  if (start && start->size() == p) {
    theta = *start;
  } else {
    // Penalized weighted least squares on the starting linear predictor, weighted by the curvature there.
    const Eigen::VectorXd eta0 = likelihood.starting_eta();
    Eigen::VectorXd w0;
    likelihood.evaluate(eta0, nullptr, &w0);
    if (!w0.allFinite()) w0 = Eigen::VectorXd::Ones(design.rows());
    const Eigen::VectorXd z = eta0 - design.offset;
    Eigen::MatrixXd h = weighted_crossprod(design.X, w0) + s;
    h.diagonal().array() += 1e-8 * std::max(1.0, h.diagonal().maxCoeff());
    theta = solve_spd(h, design.X.transpose() * w0.cwiseProduct(z));
  }

  PirlsFit fit;
  Eigen::VectorXd score, weight;
  fit.eta = design.X * theta + design.offset;
  double ll = likelihood.evaluate(fit.eta, &score, &weight);
  if (!std::isfinite(ll)) {
    // A start far from the data can overflow the mean; restart from the least-squares guess.
    if (start) return pirls(design, likelihood, lambda, nullptr, options);
    throw ConvergenceError("non-finite log-likelihood at the starting point");
  }
  double lp = ll - 0.5 * theta.dot(s * theta);
  double previous_lp = -std::numeric_limits<double>::infinity();

  for (int iter = 0;; ++iter) {
    const Eigen::VectorXd grad = design.X.transpose() * score - s * theta;
    fit.gradient_norm = grad.cwiseAbs().maxCoeff();
    fit.iterations = iter;
    const double tol = options.gradient_tolerance * (1.0 + std::abs(lp));
    if (fit.gradient_norm < tol) break;
    // Very large smoothing parameters leave a gradient floor from cancellation; stop once ascent has stalled.
    if (iter > 0 && lp - previous_lp <= 1e-14 * (1.0 + std::abs(lp)) && fit.gradient_norm < 1e3 * tol) break;
    previous_lp = lp;
    if (iter >= options.max_iterations) {
      std::ostringstream msg;
      msg << "PIRLS did not converge after " << iter << " iterations (gradient norm " << fit.gradient_norm << ")";
      throw ConvergenceError(msg.str());
    }
    const Eigen::MatrixXd h = weighted_crossprod(design.X, weight) + s;
    Eigen::VectorXd delta = solve_spd(h, grad);
    // Cap the change of the linear predictor so that one poorly conditioned step cannot overflow the mean.
    const double max_change = (design.X * delta).cwiseAbs().maxCoeff();
    if (!std::isfinite(max_change)) throw ConvergenceError("PIRLS produced a non-finite Newton step");
    if (max_change > options.max_eta_step) delta *= options.max_eta_step / max_change;

    double step = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= options.max_step_halvings; ++halving, step *= 0.5) {
      const Eigen::VectorXd candidate = theta + step * delta;
      const Eigen::VectorXd eta = design.X * candidate + design.offset;
      Eigen::VectorXd cand_score, cand_weight;
      const double cand_ll = likelihood.evaluate(eta, &cand_score, &cand_weight);
      if (!std::isfinite(cand_ll)) continue;
      const double cand_lp = cand_ll - 0.5 * candidate.dot(s * candidate);
      if (cand_lp >= lp - 1e-12 * std::abs(lp)) {
        theta = candidate;
        fit.eta = eta;
        score = std::move(cand_score);
        weight = std::move(cand_weight);
        ll = cand_ll;
        lp = cand_lp;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No ascent possible within floating-point resolution; accept if the gradient is already small.
      if (fit.gradient_norm < 1e3 * tol) break;
      std::ostringstream msg;
      msg << "PIRLS step halving failed (gradient norm " << fit.gradient_norm << ")";
      throw ConvergenceError(msg.str());
    }
  }

  fit.theta = theta;
  fit.loglik = ll;
  fit.penalized_loglik = lp;
  fit.weights = weight;
  fit.xtwx = weighted_crossprod(design.X, weight);
  fit.hessian = fit.xtwx + s;
  return fit;
}

}  // namespace epi
