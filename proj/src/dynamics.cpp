#include "dyntex/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include <Eigen/Eigenvalues>

#include "dyntex/exceptions.hpp"

namespace dyntex {

namespace {

double soft_threshold(double t, double tau) {
  if (t > tau) return t - tau;
  if (t < -tau) return t + tau;
  return 0.0;
}

Eigen::MatrixXd clamp01(Eigen::MatrixXd m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = std::clamp(m(i, j), 0.0, 1.0);
  return m;
}

} // namespace

void SynthesisSpec::validate(int state_dim) const {
  if (length < 1) throw ConfigError("synthesis length must be >= 1");
  if (!(lasso_lambda >= 0.0) || !std::isfinite(lasso_lambda)) {
    throw ConfigError("lasso_lambda must be >= 0");
  }
  if (mode == Mode::plain && lasso_lambda != 0.0) {
    throw ConfigError("plain synthesis does not use lasso_lambda; leave it 0");
  }
  if (x0.size() != state_dim) {
    throw ConfigError("x0 has length " + std::to_string(x0.size()) + ", expected " +
                      std::to_string(state_dim));
  }
  if (!x0.allFinite()) throw ConfigError("x0 contains non-finite entries");
}

FrameSequence SynthesisResult::to_sequence() const {
  return FrameSequence(frames, height, width);
}

SynthesisResult synthesize(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& dictionary,
                           const SynthesisSpec& spec, int height, int width) {
  const Eigen::Index k = dictionary.cols();
  if (transition.rows() != k || transition.cols() != k) {
    throw DataError("transition shape does not match the dictionary's atom count");
  }
  if (dictionary.rows() != static_cast<Eigen::Index>(height) * width) {
    throw DataError("frame geometry does not match the dictionary's signal dimension");
  }
  spec.validate(static_cast<int>(k));
  if (spec.mode == SynthesisSpec::Mode::plain && spec.x0.norm() == 0.0) {
    std::cerr << "warning: zero initial state in plain mode synthesizes a constant zero sequence\n";
  }

  SynthesisResult result;
  result.height = height;
  result.width = width;
  result.states.resize(k, spec.length);
  result.states.col(0) = spec.x0;
  for (int i = 1; i < spec.length; ++i) {
    Eigen::VectorXd next = transition * result.states.col(i - 1);
    if (spec.mode == SynthesisSpec::Mode::lasso) {
      for (Eigen::Index t = 0; t < next.size(); ++t) {
        next[t] = soft_threshold(next[t], spec.lasso_lambda);
      }
    }
    result.states.col(i) = next;
  }
  result.frames = clamp01(dictionary * result.states);
  return result;
}

FrameSequence reconstruct(const AvdlModel& model, const FrameSequence& corrupted) {
  if (corrupted.pixel_count() != model.dictionary.signal_dim()) {
    throw DataError("sequence geometry does not match the model's signal dimension");
  }
  const auto codes = batch_solve(model.dictionary, corrupted.data(), model.params.elastic);
  Eigen::MatrixXd decoded(corrupted.pixel_count(), corrupted.frame_count());
  for (std::size_t j = 0; j < codes.size(); ++j) {
    decoded.col(static_cast<Eigen::Index>(j)) = model.dictionary.matrix() * codes[j].values;
  }
  return FrameSequence(clamp01(std::move(decoded)), corrupted.height(), corrupted.width());
}

FrameSequence reconstruct(const LdsModel& model, const FrameSequence& corrupted) {
  if (corrupted.pixel_count() != model.pcs.rows()) {
    throw DataError("sequence geometry does not match the model's signal dimension");
  }
  Eigen::MatrixXd decoded = model.pcs * (model.pcs.transpose() * corrupted.data());
  return FrameSequence(clamp01(std::move(decoded)), corrupted.height(), corrupted.width());
}

double spectral_radius(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw DataError("spectral radius needs a square matrix");
  const Eigen::Index k = a.rows();
  if (k == 0) throw DataError("empty matrix");
  if (a.norm() == 0.0) return 0.0;

  if (k <= 512) {
    Eigen::EigenSolver<Eigen::MatrixXd> eig(a, /*computeEigenvectors=*/false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
  }

  // Power iteration with a windowed geometric-mean growth estimate, which
  // stays stable when the dominant eigenvalues are a complex pair.
  constexpr int kWindow = 16;
  constexpr int kMaxIters = 20000;
  constexpr double kTol = 1e-9;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(k).normalized();
  double previous = -1.0;
  double estimate = 0.0;
  for (int iter = 0; iter < kMaxIters; iter += kWindow) {
    double log_growth = 0.0;
    for (int j = 0; j < kWindow; ++j) {
      Eigen::VectorXd w = a * v;
      const double norm = w.norm();
      if (!(norm > 0.0)) return 0.0; // v fell into the kernel
      log_growth += std::log(norm);
      v = w / norm;
    }
    estimate = std::exp(log_growth / kWindow);
    if (previous >= 0.0 && std::abs(estimate - previous) <= kTol * std::max(1.0, estimate)) {
      return estimate;
    }
    previous = estimate;
  }
  return estimate;
}

namespace {

MetricsReport evaluate_impl(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& dictionary,
                            const Eigen::MatrixXd& observations, const Eigen::MatrixXd& states,
                            double compression) {
  if (states.cols() != observations.cols()) {
    throw DataError("one state per observation column required");
  }
  if (dictionary.rows() != observations.rows() || dictionary.cols() != states.rows()) {
    throw DataError("dictionary shape does not match observations and states");
  }
  MetricsReport report;
  for (Eigen::Index i = 0; i < observations.cols(); ++i) {
    report.e_y += (observations.col(i) - dictionary * states.col(i)).norm();
  }
  for (Eigen::Index i = 0; i + 1 < states.cols(); ++i) {
    report.e_x += (states.col(i + 1) - transition * states.col(i)).norm();
  }
  report.sigma = spectral_radius(transition);
  report.compression_rate = compression;
  return report;
}

} // namespace

MetricsReport evaluate(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& dictionary,
                       const Eigen::MatrixXd& observations, const Eigen::MatrixXd& states,
                       CompressionKind kind) {
  double compression;
  if (kind == CompressionKind::principal_components) {
    compression = static_cast<double>(dictionary.cols()) / static_cast<double>(dictionary.rows());
  } else {
    long long nnz = 0;
    for (Eigen::Index j = 0; j < states.cols(); ++j)
      for (Eigen::Index i = 0; i < states.rows(); ++i)
        if (std::abs(states(i, j)) > kSupportZeroTol) ++nnz;
    compression = static_cast<double>(nnz) /
                  (static_cast<double>(observations.rows()) * static_cast<double>(states.cols()));
  }
  return evaluate_impl(transition, dictionary, observations, states, compression);
}

MetricsReport evaluate(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& dictionary,
                       const Eigen::MatrixXd& observations, const std::vector<SparseCode>& codes) {
  if (codes.size() != static_cast<std::size_t>(observations.cols())) {
    throw DataError("one code per observation column required");
  }
  Eigen::MatrixXd states(dictionary.cols(), observations.cols());
  long long nnz = 0;
  for (std::size_t j = 0; j < codes.size(); ++j) {
    states.col(static_cast<Eigen::Index>(j)) = codes[j].values;
    nnz += codes[j].nnz();
  }
  const double compression =
      static_cast<double>(nnz) /
      (static_cast<double>(observations.rows()) * static_cast<double>(observations.cols()));
  return evaluate_impl(transition, dictionary, observations, states, compression);
}

double occlusion_hit_rate(const FrameSequence& seq, const OcclusionDetector& detector) {
  if (detector.rect_h < 1 || detector.rect_w < 1) {
    throw ConfigError("detector block must be positive");
  }
  if (detector.rect_h > seq.height() || detector.rect_w > seq.width()) {
    throw DataError("detector block larger than the frame");
  }
  const int h = seq.height();
  const int w = seq.width();
  const double block_pixels = static_cast<double>(detector.rect_h) * detector.rect_w;

  int hits = 0;
  Eigen::MatrixXd sums(h + 1, w + 1);
  for (int frame = 0; frame < seq.frame_count(); ++frame) {
    // Summed-area table, so every block position is O(1).
    sums.setZero();
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        sums(r + 1, c + 1) = seq.data()(static_cast<Eigen::Index>(r) * w + c, frame) +
                             sums(r, c + 1) + sums(r + 1, c) - sums(r, c);
    double best = 0.0;
    for (int r = 0; r + detector.rect_h <= h; ++r) {
      for (int c = 0; c + detector.rect_w <= w; ++c) {
        const double total = sums(r + detector.rect_h, c + detector.rect_w) -
                             sums(r, c + detector.rect_w) - sums(r + detector.rect_h, c) +
                             sums(r, c);
        best = std::max(best, total);
      }
    }
    if (best / block_pixels > detector.mean_threshold) ++hits;
  }
  return static_cast<double>(hits) / seq.frame_count();
}

} // namespace dyntex
