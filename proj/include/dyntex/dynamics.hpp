#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "dyntex/avdl.hpp"
#include "dyntex/frame_sequence.hpp"
#include "dyntex/lds.hpp"

namespace dyntex {

struct SynthesisSpec {
  enum class Mode { plain, lasso };

  int length = 0;            // number of frames to generate, >= 1
  Mode mode = Mode::plain;
  double lasso_lambda = 0.0; // soft-threshold weight; must be 0 in plain mode
  Eigen::VectorXd x0;        // initial state, length k

  void validate(int state_dim) const;
};

// Synthesized states and decoded frames. States are propagated unclamped so
// the dynamics are undistorted; decoded frames are clamped to [0, 1].
struct SynthesisResult {
  Eigen::MatrixXd states; // k×length
  Eigen::MatrixXd frames; // m×length, entries in [0, 1]
  int height = 0;
  int width = 0;

  // Requires length >= 2 (the FrameSequence invariant).
  FrameSequence to_sequence() const;
};

// Propagates states from spec.x0 and decodes frames through the dictionary.
//   plain: x_{i+1} = A·x_i
//   lasso: x_{i+1} = soft(A·x_i, lambda) componentwise — the exact minimizer
//          of 1/2 ||x - A·x_i||^2 + lambda ||x||_1.
// A zero x0 in plain mode produces a constant zero sequence (warned, not an
// error).
SynthesisResult synthesize(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& dictionary,
                           const SynthesisSpec& spec, int height, int width);

// Frame-by-frame reconstruction: codes each frame against the model
// dictionary (elastic net) and decodes. Output frames are clamped to [0, 1].
FrameSequence reconstruct(const AvdlModel& model, const FrameSequence& corrupted);

// Project-and-decode reconstruction: ŷ_i = pcs·pcsᵀ·y_i, clamped to [0, 1].
FrameSequence reconstruct(const LdsModel& model, const FrameSequence& corrupted);

enum class CompressionKind {
  sparse_codes,          // nonzero code entries / (m·(n+1))
  principal_components,  // k / m
};

struct MetricsReport {
  double e_y = 0.0;              // Σ_i ||y_i - D·x_i||_2
  double e_x = 0.0;              // Σ_i ||x_{i+1} - A·x_i||_2
  double sigma = 0.0;            // spectral radius of the transition
  double compression_rate = 0.0; // per CompressionKind
  std::optional<double> occlusion_hit_rate;
};

MetricsReport evaluate(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& dictionary,
                       const Eigen::MatrixXd& observations, const Eigen::MatrixXd& states,
                       CompressionKind kind);

// Convenience overload for sparse codes (AVDL).
MetricsReport evaluate(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& dictionary,
                       const Eigen::MatrixXd& observations, const std::vector<SparseCode>& codes);

// Spectral radius of a square matrix: dense eigendecomposition up to 512×512,
// power iteration (tolerance 1e-9) above.
double spectral_radius(const Eigen::MatrixXd& a);

// Geometry and signature of the block an occluder writes.
struct OcclusionDetector {
  int rect_h = 0;
  int rect_w = 0;
  double mean_threshold = 0.95;
};

// Fraction of frames containing a rect_h×rect_w block whose mean intensity
// exceeds the threshold at any position (sliding-window maximum).
double occlusion_hit_rate(const FrameSequence& seq, const OcclusionDetector& detector);

} // namespace dyntex
