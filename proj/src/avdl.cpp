#include "dyntex/avdl.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "dyntex/dynamics.hpp"
#include "dyntex/exceptions.hpp"

namespace dyntex {

namespace {

constexpr int kMaxLineSearchShrinks = 50;

Eigen::MatrixXd codes_as_matrix(const std::vector<SparseCode>& codes, int k) {
  Eigen::MatrixXd x(k, static_cast<Eigen::Index>(codes.size()));
  for (std::size_t j = 0; j < codes.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = codes[j].values;
  return x;
}

double transition_value(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& states,
                        double gamma) {
  const Eigen::Index n = states.cols() - 1;
  const Eigen::MatrixXd residual =
      states.rightCols(n) - transition * states.leftCols(n);
  return 0.5 * residual.squaredNorm() + 0.5 * gamma * transition.squaredNorm();
}

// Closed-form codes on frozen supports, as a dense k×(n+1) matrix. Empty
// supports stay zero.
Eigen::MatrixXd frozen_codes(const ObliqueDictionary& dict, const Eigen::MatrixXd& observations,
                             const std::vector<std::vector<int>>& supports,
                             const std::vector<std::vector<int>>& signs,
                             const ElasticNetParams& elastic) {
  const int k = dict.atom_count();
  Eigen::MatrixXd states = Eigen::MatrixXd::Zero(k, observations.cols());
  for (Eigen::Index j = 0; j < observations.cols(); ++j) {
    const auto& support = supports[static_cast<std::size_t>(j)];
    if (support.empty()) continue;
    const Eigen::VectorXd active = closed_form_on_support(
        dict, observations.col(j), support, signs[static_cast<std::size_t>(j)], elastic);
    for (std::size_t s = 0; s < support.size(); ++s) {
      states(support[s], j) = active[static_cast<Eigen::Index>(s)];
    }
  }
  return states;
}

} // namespace

void AvdlParams::validate() const {
  // ElasticNetParams validated itself at construction.
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
  if (max_loops < 0) throw ConfigError("max_loops must be >= 0");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("armijo_c must be in (0, 1)");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("shrink must be in (0, 1)");
  if (!(initial_step > 0.0) || !std::isfinite(initial_step)) {
    throw ConfigError("initial_step must be > 0");
  }
  if (!(tol_rel_obj >= 0.0) || !std::isfinite(tol_rel_obj)) {
    throw ConfigError("tol_rel_obj must be >= 0");
  }
}

ObjectiveResult objective(const Eigen::MatrixXd& transition, const ObliqueDictionary& dict,
                          const Eigen::MatrixXd& observations, const AvdlParams& params) {
  const int k = dict.atom_count();
  if (transition.rows() != k || transition.cols() != k) {
    throw DataError("transition must be k x k with k = " + std::to_string(k));
  }
  if (observations.cols() < 2) throw DataError("objective needs at least 2 frames");
  ObjectiveResult result;
  result.codes = batch_solve(dict, observations, params.elastic);
  result.value = transition_value(transition, codes_as_matrix(result.codes, k), params.gamma);
  return result;
}

double objective_with_supports(const Eigen::MatrixXd& transition, const ObliqueDictionary& dict,
                               const Eigen::MatrixXd& observations,
                               const std::vector<std::vector<int>>& supports,
                               const std::vector<std::vector<int>>& signs,
                               const ElasticNetParams& elastic, double gamma) {
  if (supports.size() != static_cast<std::size_t>(observations.cols()) ||
      signs.size() != supports.size()) {
    throw DataError("one support/sign pattern per observation column required");
  }
  const Eigen::MatrixXd states = frozen_codes(dict, observations, supports, signs, elastic);
  return transition_value(transition, states, gamma);
}

Eigen::MatrixXd transition_gradient(const Eigen::MatrixXd& transition,
                                    const Eigen::MatrixXd& states_from,
                                    const Eigen::MatrixXd& states_to, double gamma) {
  if (states_from.cols() != states_to.cols() || states_from.rows() != states_to.rows()) {
    throw DataError("state matrices must share shape");
  }
  return (transition * states_from - states_to) * states_from.transpose() + gamma * transition;
}

Eigen::VectorXd code_derivative(const ObliqueDictionary& dict, const Eigen::VectorXd& y,
                                const SparseCode& code, const TangentDirection& dir,
                                const ElasticNetParams& params) {
  const int k = dict.atom_count();
  Eigen::VectorXd derivative = Eigen::VectorXd::Zero(k);
  if (code.support.empty()) return derivative;

  const Eigen::MatrixXd& d = dict.matrix();
  const Eigen::MatrixXd& h = dir.matrix();
  const int s = code.nnz();
  Eigen::MatrixXd d_active(d.rows(), s), h_active(d.rows(), s);
  Eigen::VectorXd sign_vec(s);
  for (int j = 0; j < s; ++j) {
    d_active.col(j) = d.col(code.support[static_cast<std::size_t>(j)]);
    h_active.col(j) = h.col(code.support[static_cast<std::size_t>(j)]);
    sign_vec[j] = static_cast<double>(code.signs[static_cast<std::size_t>(j)]);
  }
  Eigen::MatrixXd gram = d_active.transpose() * d_active;
  gram.diagonal().array() += params.lambda2;
  Eigen::LDLT<Eigen::MatrixXd> factor(gram);

  const Eigen::VectorXd x_active =
      factor.solve(d_active.transpose() * y - params.lambda1 * sign_vec);
  const Eigen::MatrixXd cross = d_active.transpose() * h_active;
  const Eigen::VectorXd rhs =
      h_active.transpose() * y - (cross + cross.transpose()) * x_active;
  const Eigen::VectorXd active = factor.solve(rhs);
  for (int j = 0; j < s; ++j) derivative[code.support[static_cast<std::size_t>(j)]] = active[j];
  return derivative;
}

TangentDirection dictionary_gradient(const Eigen::MatrixXd& transition,
                                     const ObliqueDictionary& dict,
                                     const Eigen::MatrixXd& observations,
                                     const std::vector<SparseCode>& codes,
                                     const ElasticNetParams& params) {
  const Eigen::MatrixXd& d = dict.matrix();
  const int k = dict.atom_count();
  const Eigen::Index frames = observations.cols();
  if (codes.size() != static_cast<std::size_t>(frames)) {
    throw DataError("one code per observation column required");
  }

  // Closed-form values on each frame's support, so the gradient is exactly
  // that of the frozen-support objective the line search evaluates.
  Eigen::MatrixXd states = Eigen::MatrixXd::Zero(k, frames);
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> factors(static_cast<std::size_t>(frames));
  std::vector<Eigen::MatrixXd> actives(static_cast<std::size_t>(frames));
  for (Eigen::Index j = 0; j < frames; ++j) {
    const auto& code = codes[static_cast<std::size_t>(j)];
    const int s = code.nnz();
    if (s == 0) continue;
    Eigen::MatrixXd d_active(d.rows(), s);
    Eigen::VectorXd sign_vec(s);
    for (int t = 0; t < s; ++t) {
      d_active.col(t) = d.col(code.support[static_cast<std::size_t>(t)]);
      sign_vec[t] = static_cast<double>(code.signs[static_cast<std::size_t>(t)]);
    }
    Eigen::MatrixXd gram = d_active.transpose() * d_active;
    gram.diagonal().array() += params.lambda2;
    factors[static_cast<std::size_t>(j)].compute(gram);
    const Eigen::VectorXd x_active = factors[static_cast<std::size_t>(j)].solve(
        d_active.transpose() * observations.col(j) - params.lambda1 * sign_vec);
    for (int t = 0; t < s; ++t) states(code.support[static_cast<std::size_t>(t)], j) = x_active[t];
    actives[static_cast<std::size_t>(j)] = std::move(d_active);
  }

  // Transition residuals and their adjoint weights per frame:
  //   delta_i = x_i - A x_{i-1}            (i = 1..n)
  //   w_j     = delta_j - Aᵀ delta_{j+1}   (boundary terms dropped)
  const Eigen::Index n = frames - 1;
  Eigen::MatrixXd deltas = states.rightCols(n) - transition * states.leftCols(n);
  Eigen::MatrixXd weights(k, frames);
  for (Eigen::Index j = 0; j < frames; ++j) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
    if (j >= 1) w += deltas.col(j - 1);
    if (j <= n - 1) w -= transition.transpose() * deltas.col(j);
    weights.col(j) = w;
  }

  // Adjoint of the code derivative, accumulated in frame order so the sum is
  // reproducible. Per frame with v = K⁻¹ w_Λ:
  //   G_Λ += (y - D_Λ x_Λ)·vᵀ - (D_Λ v)·x_Λᵀ
  Eigen::MatrixXd euclidean = Eigen::MatrixXd::Zero(d.rows(), k);
  for (Eigen::Index j = 0; j < frames; ++j) {
    const auto& code = codes[static_cast<std::size_t>(j)];
    const int s = code.nnz();
    if (s == 0) continue;
    Eigen::VectorXd w_active(s);
    Eigen::VectorXd x_active(s);
    for (int t = 0; t < s; ++t) {
      w_active[t] = weights(code.support[static_cast<std::size_t>(t)], j);
      x_active[t] = states(code.support[static_cast<std::size_t>(t)], j);
    }
    const Eigen::VectorXd v = factors[static_cast<std::size_t>(j)].solve(w_active);
    const Eigen::MatrixXd& d_active = actives[static_cast<std::size_t>(j)];
    const Eigen::VectorXd residual = observations.col(j) - d_active * x_active;
    const Eigen::VectorXd dv = d_active * v;
    for (int t = 0; t < s; ++t) {
      const int col = code.support[static_cast<std::size_t>(t)];
      euclidean.col(col) += residual * v[t] - dv * x_active[t];
    }
  }
  return project_tangent(dict, euclidean);
}

namespace {

struct FrozenPattern {
  std::vector<std::vector<int>> supports;
  std::vector<std::vector<int>> signs;
  long long nnz_total = 0;
};

FrozenPattern freeze(const std::vector<SparseCode>& codes) {
  FrozenPattern pattern;
  pattern.supports.reserve(codes.size());
  pattern.signs.reserve(codes.size());
  for (const auto& code : codes) {
    pattern.supports.push_back(code.support);
    pattern.signs.push_back(code.signs);
    pattern.nnz_total += code.nnz();
  }
  return pattern;
}

AvdlInit default_init(const Eigen::MatrixXd& observations, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::Index frames = observations.cols();

  // k distinct frames plus a little jitter, columns normalized: a start that
  // already speaks the data's language.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(frames));
  for (Eigen::Index i = 0; i < frames; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::normal_distribution<double> jitter(0.0, 1e-3);

  Eigen::MatrixXd dict(observations.rows(), k);
  for (int j = 0; j < k; ++j) {
    const Eigen::Index pick = order[static_cast<std::size_t>(j % frames)];
    dict.col(j) = observations.col(pick);
    for (Eigen::Index i = 0; i < dict.rows(); ++i) dict(i, j) += jitter(rng);
    const double norm = dict.col(j).norm();
    if (norm > 0.0) dict.col(j) /= norm;
  }
  AvdlInit init;
  init.dictionary = std::move(dict);
  init.transition = 0.9 * Eigen::MatrixXd::Identity(k, k);
  return init;
}

} // namespace

AvdlModel train(const FrameSequence& sequence, int atom_count, const AvdlParams& params,
                const std::optional<AvdlInit>& init, const TrainHook& hook) {
  params.validate();
  const Eigen::MatrixXd& observations = sequence.data();
  const int m = sequence.pixel_count();
  if (atom_count < 1) throw ConfigError("atom count must be >= 1");
  if (atom_count > m && !params.allow_overcomplete) {
    throw ConfigError("atom count " + std::to_string(atom_count) + " exceeds the signal dimension " +
                      std::to_string(m) + " (set allow_overcomplete to relax, without warranty)");
  }

  AvdlInit start = init ? *init : default_init(observations, atom_count, params.seed);
  if (start.transition.rows() != atom_count || start.transition.cols() != atom_count) {
    throw DataError("initial transition must be k x k");
  }
  ObliqueDictionary dict(start.dictionary, params.allow_overcomplete);
  if (dict.atom_count() != atom_count || dict.signal_dim() != m) {
    throw DataError("initial dictionary shape does not match (m, k)");
  }
  Eigen::MatrixXd transition = start.transition;

  AvdlModel model{std::move(dict), transition, params, {}, sequence.height(), sequence.width()};
  if (params.max_loops == 0) return model;

  const double cells = static_cast<double>(m) * static_cast<double>(observations.cols());
  double previous_objective = 0.0;
  bool have_previous = false;
  double pending_step = 0.0;
  double pending_before = 0.0;
  double pending_after = 0.0;
  int loops_done = 0;
  bool stopped = false;

  for (int loop = 1; loop <= params.max_loops && !stopped; ++loop) {
    // Sparse coding stage: the only full elastic-net solve of the loop.
    const std::vector<SparseCode> codes =
        batch_solve(model.dictionary, observations, params.elastic);
    const FrozenPattern pattern = freeze(codes);
    const Eigen::MatrixXd state_matrix = codes_as_matrix(codes, atom_count);
    const double current_objective =
        transition_value(model.transition, state_matrix, params.gamma);

    if (loop >= 2) {
      model.history.push_back({loop - 1, current_objective, pending_step,
                               spectral_radius(model.transition),
                               static_cast<double>(pattern.nnz_total) / cells, pending_before,
                               pending_after});
    }
    if (have_previous && params.tol_rel_obj > 0.0) {
      const double denom = std::max(std::abs(previous_objective), 1e-300);
      if (std::abs(previous_objective - current_objective) / denom < params.tol_rel_obj) {
        loops_done = loop - 1;
        stopped = true;
        break;
      }
    }
    previous_objective = current_objective;
    have_previous = true;

    // Gradients at the frozen coding stage.
    const Eigen::Index n = observations.cols() - 1;
    const Eigen::MatrixXd grad_a = transition_gradient(
        model.transition, state_matrix.leftCols(n), state_matrix.rightCols(n), params.gamma);
    const TangentDirection grad_d = dictionary_gradient(
        model.transition, model.dictionary, observations, codes, params.elastic);
    const double grad_sq = grad_a.squaredNorm() + grad_d.matrix().squaredNorm();
    if (grad_sq == 0.0) {
      // Exactly stationary: no step can strictly decrease the objective.
      loops_done = loop - 1;
      break;
    }

    // One backtracking step length shared by both updates, descending the
    // frozen-support objective.
    const double frozen_base = objective_with_supports(
        model.transition, model.dictionary, observations, pattern.supports, pattern.signs,
        params.elastic, params.gamma);
    double step = params.initial_step;
    bool accepted = false;
    double frozen_stepped = frozen_base;
    Eigen::MatrixXd candidate_transition;
    std::optional<ObliqueDictionary> candidate_dict;
    for (int attempt = 0; attempt <= kMaxLineSearchShrinks; ++attempt) {
      candidate_transition = model.transition - step * grad_a;
      try {
        candidate_dict = retract(model.dictionary, grad_d, -step);
      } catch (const RetractionError&) {
        step *= params.shrink;
        continue;
      }
      frozen_stepped =
          objective_with_supports(candidate_transition, *candidate_dict, observations,
                                  pattern.supports, pattern.signs, params.elastic, params.gamma);
      if (frozen_stepped <= frozen_base - params.armijo_c * step * grad_sq) {
        accepted = true;
        break;
      }
      step *= params.shrink;
    }

    if (!accepted) {
      // No decreasing step within the shrink budget: keep the current model.
      loops_done = loop - 1;
      stopped = true;
      break;
    }

    if (hook) {
      hook(TrainLoopInfo{loop, model.transition, model.dictionary, grad_a, grad_d, step,
                         frozen_base, frozen_stepped});
    }
    model.transition = candidate_transition;
    model.dictionary = std::move(*candidate_dict);
    pending_step = step;
    pending_before = frozen_base;
    pending_after = frozen_stepped;
    loops_done = loop;
  }

  if (loops_done >= 1 &&
      static_cast<int>(model.history.size()) < loops_done) {
    // Final row: fresh codes against the final model, exactly what an
    // evaluation run would recompute.
    const std::vector<SparseCode> codes =
        batch_solve(model.dictionary, observations, params.elastic);
    const FrozenPattern pattern = freeze(codes);
    const double final_objective =
        transition_value(model.transition, codes_as_matrix(codes, atom_count), params.gamma);
    model.history.push_back({loops_done, final_objective, pending_step,
                             spectral_radius(model.transition),
                             static_cast<double>(pattern.nnz_total) / cells, pending_before,
                             pending_after});
  }
  return model;
}

} // namespace dyntex
