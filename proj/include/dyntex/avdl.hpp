#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "dyntex/elastic_net.hpp"
#include "dyntex/frame_sequence.hpp"
#include "dyntex/manifold.hpp"

namespace dyntex {

// Training knobs for the alternating sparse-coding / gradient-descent loop.
struct AvdlParams {
  ElasticNetParams elastic;
  double gamma = 0.5;        // weight of the stability penalty gamma/2 ||A||_F^2
  int max_loops = 100;       // outer loops; 0 returns the initialization
  double armijo_c = 1e-4;    // sufficient-decrease constant, in (0, 1)
  double shrink = 0.5;       // backtracking factor, in (0, 1)
  double initial_step = 1.0;
  double tol_rel_obj = 1e-6; // relative objective change for early stop; 0 disables
  std::uint64_t seed = 0;    // drives the default initialization
  bool allow_overcomplete = false; // accept atom_count > signal_dim, without warranty

  explicit AvdlParams(ElasticNetParams e) : elastic(e) {}

  // Throws ConfigError if any field is outside its documented range.
  void validate() const;
};

// One per-loop history record; row `loop` describes the model after `loop`
// updates, with objective and nnz_fraction computed from a fresh batch solve
// against that model. frozen_before/frozen_after are the line-searched
// objective (codes' supports and signs held fixed) before and after the
// accepted step; Armijo guarantees frozen_after < frozen_before.
struct TrainingRecord {
  int loop = 0;
  double objective = 0.0;
  double step = 0.0;
  double sigma = 0.0;
  double nnz_fraction = 0.0; // nonzero code entries / (m*(n+1)), the sparse compression rate
  double frozen_before = 0.0;
  double frozen_after = 0.0;
};

struct AvdlModel {
  ObliqueDictionary dictionary;
  Eigen::MatrixXd transition;
  AvdlParams params;
  std::vector<TrainingRecord> history;
  int height = 0;
  int width = 0;
};

// Optional starting point; defaults are data-coherent (jittered frames) for
// the dictionary and 0.9·I for the transition.
struct AvdlInit {
  Eigen::MatrixXd transition;
  Eigen::MatrixXd dictionary; // unit-norm columns required
};

struct ObjectiveResult {
  double value = 0.0;
  std::vector<SparseCode> codes;
};

// Codes every column of Y against D, then evaluates
//   1/2 ||X1 - A·X0||_F^2 + gamma/2 ||A||_F^2
// with X0 = codes 0..n-1 and X1 = codes 1..n as columns.
ObjectiveResult objective(const Eigen::MatrixXd& transition, const ObliqueDictionary& dict,
                          const Eigen::MatrixXd& observations, const AvdlParams& params);

// The same objective with the coding stage frozen: each column's code is the
// closed form on the given support/sign pattern, a smooth function of the
// dictionary. This is the function the line search descends and the
// finite-difference oracles differentiate.
double objective_with_supports(const Eigen::MatrixXd& transition, const ObliqueDictionary& dict,
                               const Eigen::MatrixXd& observations,
                               const std::vector<std::vector<int>>& supports,
                               const std::vector<std::vector<int>>& signs,
                               const ElasticNetParams& elastic, double gamma);

// Gradient of the objective with respect to the transition at fixed codes:
//   (A·X0 - X1)·X0ᵀ + gamma·A.
Eigen::MatrixXd transition_gradient(const Eigen::MatrixXd& transition,
                                    const Eigen::MatrixXd& states_from,
                                    const Eigen::MatrixXd& states_to, double gamma);

// Directional derivative of the sparse code along a tangent direction H, at
// fixed support: zero off the support, and on the support
//   K⁻¹·(H_Λᵀ y - (D_Λᵀ H_Λ + H_Λᵀ D_Λ)·x_Λ),  K = D_Λᵀ D_Λ + lambda2·I.
// An empty support returns the zero vector (the code is identically zero in
// a neighborhood).
Eigen::VectorXd code_derivative(const ObliqueDictionary& dict, const Eigen::VectorXd& y,
                                const SparseCode& code, const TangentDirection& dir,
                                const ElasticNetParams& params);

// Riemannian gradient of the objective with respect to the dictionary at the
// codes' supports: the Euclidean gradient is assembled frame by frame in
// adjoint form (each transition residual back-propagates through the code
// derivatives of both frames), then projected onto the tangent space.
TangentDirection dictionary_gradient(const Eigen::MatrixXd& transition,
                                     const ObliqueDictionary& dict,
                                     const Eigen::MatrixXd& observations,
                                     const std::vector<SparseCode>& codes,
                                     const ElasticNetParams& params);

// Per-loop diagnostics handed to the training hook just before the update is
// applied; references are valid only during the call.
struct TrainLoopInfo {
  int loop; // 1-based
  const Eigen::MatrixXd& transition;
  const ObliqueDictionary& dictionary;
  const Eigen::MatrixXd& transition_grad;
  const TangentDirection& dictionary_grad;
  double step; // accepted step, 0 when the line search failed
  double frozen_before;
  double frozen_after;
};
using TrainHook = std::function<void(const TrainLoopInfo&)>;

// Alternating training: per loop, batch sparse coding, both gradients, one
// backtracking (Armijo) step length shared by the transition and dictionary
// updates, dictionary update through the normalizing retraction. Stops after
// max_loops, when the relative objective change drops below tol_rel_obj, or
// when the line search cannot find a decreasing step in 50 shrinks (the
// current model is returned with history up to that point).
AvdlModel train(const FrameSequence& sequence, int atom_count, const AvdlParams& params,
                const std::optional<AvdlInit>& init = std::nullopt,
                const TrainHook& hook = nullptr);

} // namespace dyntex
