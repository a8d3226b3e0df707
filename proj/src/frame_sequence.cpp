#include "dyntex/frame_sequence.hpp"

#include <cmath>
#include <string>

#include "dyntex/exceptions.hpp"

namespace dyntex {

FrameSequence::FrameSequence(Eigen::MatrixXd data, int height, int width)
    : data_(std::move(data)), height_(height), width_(width) {
  if (height_ <= 0 || width_ <= 0) {
    throw DataError("frame geometry must be positive, got " + std::to_string(height_) + "x" +
                    std::to_string(width_));
  }
  if (data_.rows() != static_cast<Eigen::Index>(height_) * width_) {
    throw DataError("pixel count " + std::to_string(data_.rows()) + " does not match geometry " +
                    std::to_string(height_) + "x" + std::to_string(width_));
  }
  if (data_.cols() < 2) {
    throw DataError("a sequence needs at least 2 frames (one transition), got " +
                    std::to_string(data_.cols()));
  }
  for (Eigen::Index j = 0; j < data_.cols(); ++j) {
    for (Eigen::Index i = 0; i < data_.rows(); ++i) {
      const double v = data_(i, j);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw DataError("pixel (" + std::to_string(i) + ", frame " + std::to_string(j) +
                        ") = " + std::to_string(v) + " outside [0, 1]");
      }
    }
  }
}

Eigen::MatrixXd FrameSequence::frame_image(int index) const {
  if (index < 0 || index >= frame_count()) {
    throw DataError("frame index " + std::to_string(index) + " out of range");
  }
  Eigen::MatrixXd image(height_, width_);
  for (int r = 0; r < height_; ++r)
    for (int c = 0; c < width_; ++c) image(r, c) = data_(static_cast<Eigen::Index>(r) * width_ + c, index);
  return image;
}

} // namespace dyntex
