#pragma once

#include <Eigen/Core>

#include "dyntex/frame_sequence.hpp"

namespace dyntex {

// Classical PCA-based linear dynamical system: observations are projected
// onto the top-k left singular vectors and the transition is the
// least-squares fit between consecutive projected states.
struct LdsModel {
  Eigen::MatrixXd pcs;             // m×k, orthonormal columns
  Eigen::MatrixXd transition;      // k×k
  Eigen::MatrixXd states;          // k×(n+1), exactly pcsᵀ·Y for the training Y
  Eigen::VectorXd singular_values; // top k singular values of Y
  int height = 0;
  int width = 0;
};

// Fits the model by SVD of the observation matrix. Requires
// 1 <= k <= min(m, n+1); throws DataError (naming the numerical rank) when k
// exceeds the rank of Y. The transition solves min ||X1 - A·X0||_F via the
// pseudoinverse of X0 (singular values below 1e-10·σ_max truncated).
LdsModel fit_lds(const FrameSequence& sequence, int k);

// Distance between two models from the principal angles θ_i between their
// extended observability subspaces span[D; DA; ...; DA^(horizon-1)]:
//   -Σ ln(cos²θ_i), with cos²θ_i floored at 1e-12.
// Symmetric, zero on identical models, invariant to internal state-basis
// changes. A model with an all-zero observability matrix yields +infinity.
double martin_distance(const LdsModel& a, const LdsModel& b, int horizon);

} // namespace dyntex
