#pragma once

#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "dyntex/frame_sequence.hpp"

namespace dyntex {

// Additive i.i.d. zero-mean noise, clamped back into [0, 1].
struct GaussianNoise {
  double stddev = 0.0;
  std::uint64_t seed = 0;
};

// Overwrites a rect_h×rect_w block (seeded-random position) with `intensity`
// in a seeded-random subset of ceil(frame_fraction * frame_count) frames.
struct Occlusion {
  int rect_h = 0;
  int rect_w = 0;
  double frame_fraction = 0.0;
  std::uint64_t seed = 0;
  double intensity = 1.0;
};

using CorruptionSpec = std::variant<GaussianNoise, Occlusion>;

// Loads 8- or 16-bit grayscale PGM frames (binary P5 or ASCII P2). All files
// must share dimensions; pixel values are divided by the file's maxval.
// Rejections name the offending path.
FrameSequence load_sequence(const std::vector<std::filesystem::path>& paths);

// Writes one binary P5 PGM (maxval 255) per column, values clamped to [0, 1]
// and rounded to 0–255. Filenames are zero-padded frame numbers so that
// lexicographic order preserves frame order. Returns the written paths.
std::vector<std::filesystem::path> save_sequence(const FrameSequence& seq,
                                                 const std::filesystem::path& dir);

// Same writer for a raw frame matrix; accepts any column count >= 1 (sequence
// synthesis can emit a single frame).
std::vector<std::filesystem::path> save_frames(const Eigen::MatrixXd& frames,
                                               int height, int width,
                                               const std::filesystem::path& dir);

// Deterministic given the spec (seeds included in the spec).
FrameSequence corrupt(const FrameSequence& seq, const CorruptionSpec& spec);

// All *.pgm files in `dir`, sorted by filename.
std::vector<std::filesystem::path> list_pgm_files(const std::filesystem::path& dir);

} // namespace dyntex
