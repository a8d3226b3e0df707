#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dyntex/avdl.hpp"
#include "dyntex/dynamics.hpp"
#include "dyntex/frame_sequence.hpp"
#include "dyntex/lds.hpp"

namespace dyntex {

template <typename Model>
struct Labeled {
  std::string label;
  Model model;
};

struct ClassificationResult {
  std::string predicted;
  std::map<std::string, double> scores; // label -> score, lower is better
  double margin = 0.0;                  // runner-up score - best score
};

// Nearest neighbor under the Martin distance: score(label) is the smallest
// distance from the test model to any reference with that label; ties go to
// the smallest label in canonical (lexicographic) order.
ClassificationResult nn_classify(const LdsModel& test, const std::vector<Labeled<LdsModel>>& refs,
                                 int horizon);

// Minimum-reconstruction-error classification: each class model codes the
// test frames, score(c) = e_y(c) + beta·e_x(c). A solver failure makes that
// class's score +infinity (warned). Ties go to the smallest label.
ClassificationResult src_classify(const FrameSequence& test,
                                  const std::vector<Labeled<AvdlModel>>& refs, double beta,
                                  const ElasticNetParams& elastic);

struct LabeledClip {
  std::string label;
  FrameSequence clip;
};

struct BenchmarkConfig {
  double block_area_fraction = 0.2; // occluder area relative to the frame
  double train_fraction = 0.5;      // seeded per-class split
  std::uint64_t seed = 1;
  int lds_k = 8;
  int martin_horizon = 10;
  int avdl_k = 16;
  AvdlParams avdl{ElasticNetParams(0.1, 0.005)};
  double src_beta = 1.0;
};

struct BenchmarkCell {
  std::string method; // "lds_nn" or "avdl_src"
  double occlusion_rate = 0.0;
  double accuracy = 0.0;
};

struct ClipPrediction {
  std::string method;
  double occlusion_rate = 0.0;
  std::string true_label;
  std::string predicted;
  double margin = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkCell> table;          // row-major: method × rate
  std::vector<ClipPrediction> predictions;   // per test clip, for auditing
};

// The occlusion-robustness experiment: per class, a seeded train/test split;
// per-clip LDS reference models and one AVDL model per class (trained on the
// class's training clips concatenated along time); test clips corrupted at
// each occlusion rate (rate = fraction of frames carrying the block) and
// classified by both methods. Deterministic given the seed.
BenchmarkResult run_occlusion_benchmark(const std::vector<LabeledClip>& corpus,
                                        const std::vector<double>& occlusion_rates,
                                        const BenchmarkConfig& config);

} // namespace dyntex
