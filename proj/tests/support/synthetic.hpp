#pragma once

// Test-support generators and oracles: random oblique dictionaries and
// tangent directions, planted dynamical-texture models whose ground truth is
// known exactly, and finite-difference helpers. Everything is seeded and
// deterministic.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "dyntex/frame_sequence.hpp"
#include "dyntex/manifold.hpp"

namespace testsupport {

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = gauss(rng);
  return m;
}

inline dyntex::ObliqueDictionary random_dictionary(int m, int k, std::mt19937_64& rng) {
  return dyntex::ObliqueDictionary::normalized(random_matrix(m, k, rng));
}

// Entrywise-nonnegative unit columns: decoded frames of nonnegative codes
// stay nonnegative, which keeps planted sequences inside [0, 1]. A Bernoulli
// mask keeps the atoms from all overlapping, so the mutual coherence stays
// moderate.
inline Eigen::MatrixXd random_nonneg_atoms(int m, int k, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(0.25);
  Eigen::MatrixXd d = random_matrix(m, k, rng).cwiseAbs();
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < m; ++i) d(i, j) = keep(rng) ? d(i, j) + 0.05 : 0.01;
  for (int j = 0; j < k; ++j) d.col(j) /= d.col(j).norm();
  return d;
}

inline dyntex::ObliqueDictionary random_nonneg_dictionary(int m, int k, std::mt19937_64& rng) {
  return dyntex::ObliqueDictionary(random_nonneg_atoms(m, k, rng));
}

inline Eigen::MatrixXd random_orthogonal(int n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(n, n, rng));
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  for (int j = 0; j < n; ++j)
    if (qr.matrixQR()(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

inline dyntex::TangentDirection random_tangent(const dyntex::ObliqueDictionary& dict,
                                               std::mt19937_64& rng, bool unit_norm = true) {
  Eigen::MatrixXd ambient = random_matrix(dict.signal_dim(), dict.atom_count(), rng);
  dyntex::TangentDirection dir = dyntex::project_tangent(dict, ambient);
  if (!unit_norm) return dir;
  const double norm = dir.matrix().norm();
  assert(norm > 0.0);
  return dyntex::TangentDirection(dict, dir.matrix() / norm);
}

// Block-diagonal stable transition: a slow near-unit mode, then damped
// rotation blocks at distinct frequencies, then damped scalars. Rotations
// keep the state energy circulating, which is what makes the decoded
// sequence flicker instead of fading.
inline Eigen::MatrixXd rotation_transition(int k, std::mt19937_64& rng, double base_radius = 0.9995) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  a(0, 0) = base_radius;
  std::uniform_real_distribution<double> angle(0.15, 0.8);
  std::uniform_real_distribution<double> radius(0.95, 0.995);
  int i = 1;
  while (i + 1 < k) {
    const double theta = angle(rng);
    const double r = radius(rng);
    a(i, i) = r * std::cos(theta);
    a(i, i + 1) = -r * std::sin(theta);
    a(i + 1, i) = r * std::sin(theta);
    a(i + 1, i + 1) = r * std::cos(theta);
    i += 2;
  }
  if (i < k) a(i, i) = 0.9;
  return a;
}

struct Planted {
  Eigen::MatrixXd transition;
  Eigen::MatrixXd dictionary; // nonnegative unit columns; column 0 is the flat baseline
  Eigen::MatrixXd states;     // k_true×frames, exact linear propagation
  Eigen::MatrixXd frames;     // = dictionary * states, inside (0, 1), no clamping
  int height = 0;
  int width = 0;
};

// Gaussian-blob atoms over a flat baseline: an exact low-rank linear system
// whose decoded frames sit strictly inside [0, 1]. noise_std > 0 adds clamped
// pixel noise to `frames` (the exact product is then no longer stored).
inline Planted make_flicker(int height, int width, int k_true, int frame_count, double noise_std,
                            std::uint64_t seed) {
  assert(k_true >= 2);
  std::mt19937_64 rng(seed);
  const int m = height * width;

  // The baseline atom is a random positive texture, bounded away from zero;
  // sequences planted from different seeds therefore differ in their dominant
  // component, not only in the oscillations.
  Eigen::MatrixXd dict(m, k_true);
  {
    std::normal_distribution<double> gauss;
    for (int i = 0; i < m; ++i) dict(i, 0) = 0.3 + std::min(std::abs(gauss(rng)), 1.0);
    dict.col(0) /= dict.col(0).norm();
  }
  std::uniform_real_distribution<double> center_r(0.0, height - 1.0);
  std::uniform_real_distribution<double> center_c(0.0, width - 1.0);
  std::uniform_real_distribution<double> blob_width(height / 8.0, height / 3.0);
  for (int j = 1; j < k_true; ++j) {
    const double r0 = center_r(rng), c0 = center_c(rng), s = blob_width(rng);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) {
        const double d2 = (r - r0) * (r - r0) + (c - c0) * (c - c0);
        dict(r * width + c, j) = std::exp(-d2 / (2.0 * s * s));
      }
    dict.col(j) /= dict.col(j).norm();
  }

  const Eigen::MatrixXd transition = rotation_transition(k_true, rng);

  Eigen::VectorXd x0(k_true);
  x0[0] = 0.5 / dict.col(0).mean(); // mean decoded baseline pixel near 0.5
  std::uniform_real_distribution<double> osc(-1.0, 1.0);
  for (int j = 1; j < k_true; ++j) x0[j] = osc(rng);

  // Scale the oscillatory part down until every decoded pixel stays inside
  // (0.01, 0.99) over the whole horizon.
  Planted planted;
  planted.height = height;
  planted.width = width;
  planted.dictionary = dict;
  planted.transition = transition;
  double osc_scale = 2.0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    Eigen::VectorXd x = x0;
    x.tail(k_true - 1) *= osc_scale;
    Eigen::MatrixXd states(k_true, frame_count);
    states.col(0) = x;
    for (int t = 1; t < frame_count; ++t) states.col(t) = transition * states.col(t - 1);
    Eigen::MatrixXd frames = dict * states;
    if (frames.minCoeff() > 0.01 && frames.maxCoeff() < 0.99) {
      planted.states = std::move(states);
      planted.frames = std::move(frames);
      break;
    }
    osc_scale *= 0.8;
  }
  if (planted.frames.size() == 0) throw std::logic_error("flicker generator failed to fit range");

  if (noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std);
    for (Eigen::Index j = 0; j < planted.frames.cols(); ++j)
      for (Eigen::Index i = 0; i < planted.frames.rows(); ++i)
        planted.frames(i, j) = std::clamp(planted.frames(i, j) + noise(rng), 0.0, 1.0);
  }
  return planted;
}

inline dyntex::FrameSequence to_sequence(const Planted& planted) {
  return dyntex::FrameSequence(planted.frames, planted.height, planted.width);
}

// A fresh trajectory of an existing planted model: same baseline amplitude,
// resampled oscillatory components, optional clamped pixel noise. Clips drawn
// from the same model share its dictionary and dynamics, which is what a
// class of a classification corpus needs.
inline dyntex::FrameSequence planted_clip(const Planted& planted, int frame_count,
                                          double noise_std, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int k = static_cast<int>(planted.states.rows());
  const double osc_reference = planted.states.col(0).tail(k - 1).cwiseAbs().maxCoeff();
  std::uniform_real_distribution<double> osc(-1.0, 1.0);

  Eigen::VectorXd x0(k);
  x0[0] = planted.states(0, 0);
  for (int j = 1; j < k; ++j) x0[j] = osc(rng) * osc_reference;

  Eigen::MatrixXd frames;
  double scale = 1.5;
  for (int attempt = 0; attempt < 64; ++attempt) {
    Eigen::VectorXd x = x0;
    x.tail(k - 1) *= scale;
    Eigen::MatrixXd states(k, frame_count);
    states.col(0) = x;
    for (int t = 1; t < frame_count; ++t) states.col(t) = planted.transition * states.col(t - 1);
    frames = planted.dictionary * states;
    if (frames.minCoeff() > 0.01 && frames.maxCoeff() < 0.99) break;
    frames.resize(0, 0);
    scale *= 0.8;
  }
  if (frames.size() == 0) throw std::logic_error("planted_clip failed to fit range");

  if (noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_std);
    for (Eigen::Index j = 0; j < frames.cols(); ++j)
      for (Eigen::Index i = 0; i < frames.rows(); ++i)
        frames(i, j) = std::clamp(frames(i, j) + noise(rng), 0.0, 1.0);
  }
  return dyntex::FrameSequence(std::move(frames), planted.height, planted.width);
}

struct SparsePlanted {
  Eigen::MatrixXd transition; // scaled cyclic shift: sparsity is preserved exactly
  Eigen::MatrixXd dictionary; // nonnegative unit columns
  Eigen::MatrixXd codes;      // k×frames, exactly `sparsity` nonzeros per column
  Eigen::MatrixXd frames;     // = dictionary * codes, inside [0, 1)
  int height = 0;
  int width = 0;
};

// Sparse codes under exact linear dynamics: the transition is a damped cyclic
// shift, so x_{i+1} = A x_i holds exactly and every column keeps the same
// number of nonzeros.
inline SparsePlanted make_sparse_planted(int height, int width, int k, int sparsity,
                                         int frame_count, std::uint64_t seed,
                                         double shift_decay = 0.97) {
  assert(sparsity >= 1 && sparsity <= k);
  std::mt19937_64 rng(seed);
  const int m = height * width;

  SparsePlanted planted;
  planted.height = height;
  planted.width = width;
  planted.dictionary = random_nonneg_atoms(m, k, rng);

  planted.transition = Eigen::MatrixXd::Zero(k, k);
  for (int j = 0; j < k; ++j) planted.transition((j + 1) % k, j) = shift_decay;

  std::vector<int> order(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> amplitude(0.3, 1.0);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(k);
  for (int t = 0; t < sparsity; ++t) x0[order[static_cast<std::size_t>(t)]] = amplitude(rng);

  planted.codes.resize(k, frame_count);
  planted.codes.col(0) = x0;
  for (int t = 1; t < frame_count; ++t) {
    planted.codes.col(t) = planted.transition * planted.codes.col(t - 1);
  }
  planted.frames = planted.dictionary * planted.codes;
  const double peak = planted.frames.maxCoeff();
  if (peak >= 0.95) {
    const double rescale = 0.9 / peak;
    planted.codes *= rescale;
    planted.frames *= rescale;
  }
  return planted;
}

inline dyntex::FrameSequence to_sequence(const SparsePlanted& planted) {
  return dyntex::FrameSequence(planted.frames, planted.height, planted.width);
}

// -- numerical oracles -------------------------------------------------------

template <typename F>
double central_difference(const F& f, double eps) {
  return (f(eps) - f(-eps)) / (2.0 * eps);
}

inline double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / denom;
}

inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / denom;
}

} // namespace testsupport
