#pragma once

#include <Eigen/Core>

namespace dyntex {

// Membership tolerance for unit columns and tangency checks.
inline constexpr double kManifoldTol = 1e-10;

// A dictionary whose columns live on the product of unit spheres: every
// column has Euclidean norm 1 (ddiag(DᵀD) = I). Non-redundant dictionaries
// (atom_count <= signal_dim) are the supported regime; overcomplete ones are
// rejected at construction unless explicitly allowed (no warranty).
class ObliqueDictionary {
public:
  explicit ObliqueDictionary(Eigen::MatrixXd columns, bool allow_overcomplete = false);

  // Normalizes every column to unit length first, then validates.
  static ObliqueDictionary normalized(Eigen::MatrixXd columns,
                                      bool allow_overcomplete = false);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  int signal_dim() const { return static_cast<int>(matrix_.rows()); }
  int atom_count() const { return static_cast<int>(matrix_.cols()); }

private:
  Eigen::MatrixXd matrix_;
};

// A direction in the tangent space at `base`: ddiag(matrixᵀ·base) = 0.
// Constructed through project_tangent() or validated against the base.
class TangentDirection {
public:
  TangentDirection(const ObliqueDictionary& base, Eigen::MatrixXd matrix);

  const Eigen::MatrixXd& matrix() const { return matrix_; }

private:
  Eigen::MatrixXd matrix_;
};

// Diagonal of Z as a matrix: ddiag(Z) keeps the diagonal, zeroes the rest.
Eigen::MatrixXd ddiag(const Eigen::MatrixXd& z);

// Orthogonal projection of an ambient matrix onto the tangent space at D,
// with respect to the trace inner product: H - D·ddiag(DᵀH).
TangentDirection project_tangent(const ObliqueDictionary& dict, const Eigen::MatrixXd& ambient);

// The normalizing curve through D in direction H: every column of D + tH is
// scaled back to unit length. Passes through D at t = 0 and matches D + tH
// to first order. Throws RetractionError if a column of D + tH vanishes
// (step too long; shrink t).
ObliqueDictionary retract(const ObliqueDictionary& dict, const TangentDirection& dir, double t);

} // namespace dyntex
