#pragma once

#include <vector>

#include <Eigen/Core>

#include "dyntex/manifold.hpp"

namespace dyntex {

// Entries with |x_i| at or below this are treated as exact zeros when the
// support is formed.
inline constexpr double kSupportZeroTol = 1e-12;

// Regularization weights of the sparse coding problem
//   min_x 1/2 ||y - Dx||^2 + lambda1 ||x||_1 + lambda2/2 ||x||^2.
// Both weights must be positive; lambda2 makes the problem strongly convex
// so the minimizer is unique. lambda2 >= lambda1/10 draws a warning (sparse
// solutions want a dominant l1 term) but is accepted.
struct ElasticNetParams {
  double lambda1;
  double lambda2;
  double kkt_tolerance = 1e-8; // max KKT violation at convergence
  int max_sweeps = 10000;      // coordinate-descent sweep cap

  ElasticNetParams(double l1, double l2);
  ElasticNetParams(double l1, double l2, double kkt_tol, int sweeps);
};

// One sparse state: a dense value vector whose nonzeros are exactly the
// support, plus the support's sign pattern. Support indices are 0-based and
// strictly increasing.
struct SparseCode {
  Eigen::VectorXd values;
  std::vector<int> support;
  std::vector<int> signs;

  static SparseCode from_dense(const Eigen::VectorXd& x, double zero_tol = kSupportZeroTol);

  int nnz() const { return static_cast<int>(support.size()); }
};

// Solves the elastic-net problem by cyclic coordinate descent with
// covariance (Gram) updates. Deterministic: fixed coordinate order, cold
// start. Throws NumericError with the final violation if the sweep cap is
// reached before the KKT tolerance.
SparseCode solve(const ObliqueDictionary& dict, const Eigen::VectorXd& y,
                 const ElasticNetParams& params);

// The minimizer restricted to a fixed support and sign pattern:
//   (D_Λᵀ D_Λ + lambda2·I)⁻¹ (D_Λᵀ y - lambda1·s_Λ).
// Returns a vector of length |Λ|. lambda2 > 0 keeps the system invertible.
Eigen::VectorXd closed_form_on_support(const ObliqueDictionary& dict,
                                       const Eigen::VectorXd& y,
                                       const std::vector<int>& support,
                                       const std::vector<int>& signs,
                                       const ElasticNetParams& params);

// Column-wise solve of an observation matrix. Columns are independent and
// may be coded in parallel; the result equals the sequential column-by-column
// loop bit for bit. Solver failures are tagged with the column index.
std::vector<SparseCode> batch_solve(const ObliqueDictionary& dict,
                                    const Eigen::MatrixXd& observations,
                                    const ElasticNetParams& params);

// Max KKT violation of x for the elastic-net problem (the solver's
// convergence certificate, exposed so callers can audit solutions):
//   on the support:  |D_iᵀ(Dx - y) + lambda2·x_i + lambda1·sign(x_i)|
//   off the support: max(0, |D_iᵀ(Dx - y)| - lambda1).
double kkt_violation(const ObliqueDictionary& dict, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& x, const ElasticNetParams& params);

} // namespace dyntex
