#include "dyntex/manifold.hpp"

#include <cmath>
#include <string>

#include "dyntex/exceptions.hpp"

namespace dyntex {

ObliqueDictionary::ObliqueDictionary(Eigen::MatrixXd columns, bool allow_overcomplete)
    : matrix_(std::move(columns)) {
  if (matrix_.rows() < 1 || matrix_.cols() < 1) {
    throw DataError("dictionary must be non-empty");
  }
  if (!allow_overcomplete && matrix_.cols() > matrix_.rows()) {
    throw ConfigError("overcomplete dictionary (" + std::to_string(matrix_.rows()) + "x" +
                      std::to_string(matrix_.cols()) +
                      "): atom count must not exceed the signal dimension "
                      "(set allow_overcomplete to relax, without warranty)");
  }
  for (Eigen::Index j = 0; j < matrix_.cols(); ++j) {
    const double norm = matrix_.col(j).norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kManifoldTol) {
      throw DataError("dictionary column " + std::to_string(j) + " has norm " +
                      std::to_string(norm) + ", expected 1");
    }
  }
}

ObliqueDictionary ObliqueDictionary::normalized(Eigen::MatrixXd columns, bool allow_overcomplete) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    const double norm = columns.col(j).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw DataError("cannot normalize zero or non-finite column " + std::to_string(j));
    }
    columns.col(j) /= norm;
  }
  return ObliqueDictionary(std::move(columns), allow_overcomplete);
}

TangentDirection::TangentDirection(const ObliqueDictionary& base, Eigen::MatrixXd matrix)
    : matrix_(std::move(matrix)) {
  const Eigen::MatrixXd& d = base.matrix();
  if (matrix_.rows() != d.rows() || matrix_.cols() != d.cols()) {
    throw DataError("tangent direction shape does not match the base dictionary");
  }
  for (Eigen::Index j = 0; j < matrix_.cols(); ++j) {
    const double along_normal = d.col(j).dot(matrix_.col(j));
    if (std::abs(along_normal) > kManifoldTol) {
      throw DataError("direction is not tangent at column " + std::to_string(j) +
                      " (normal component " + std::to_string(along_normal) + ")");
    }
  }
}

Eigen::MatrixXd ddiag(const Eigen::MatrixXd& z) {
  if (z.rows() != z.cols()) {
    throw DataError("ddiag needs a square matrix, got " + std::to_string(z.rows()) + "x" +
                    std::to_string(z.cols()));
  }
  return z.diagonal().asDiagonal();
}

TangentDirection project_tangent(const ObliqueDictionary& dict, const Eigen::MatrixXd& ambient) {
  const Eigen::MatrixXd& d = dict.matrix();
  if (ambient.rows() != d.rows() || ambient.cols() != d.cols()) {
    throw DataError("projection input shape does not match the dictionary");
  }
  // Only the diagonal of DᵀH is needed: column-wise inner products.
  Eigen::MatrixXd projected = ambient;
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    projected.col(j) -= d.col(j) * d.col(j).dot(ambient.col(j));
  }
  return TangentDirection(dict, std::move(projected));
}

ObliqueDictionary retract(const ObliqueDictionary& dict, const TangentDirection& dir, double t) {
  if (t == 0.0) return dict; // the curve passes through the base point exactly
  Eigen::MatrixXd stepped = dict.matrix() + t * dir.matrix();
  for (Eigen::Index j = 0; j < stepped.cols(); ++j) {
    const double norm = stepped.col(j).norm();
    if (!(norm > 1e-12) || !std::isfinite(norm)) {
      throw RetractionError("retraction step annihilates column " + std::to_string(j) +
                            " (t = " + std::to_string(t) + ")");
    }
    stepped.col(j) /= norm;
  }
  // The base already passed the overcompleteness policy; retraction keeps
  // the shape, so only the unit norms need revalidation.
  return ObliqueDictionary(std::move(stepped), /*allow_overcomplete=*/true);
}

} // namespace dyntex
