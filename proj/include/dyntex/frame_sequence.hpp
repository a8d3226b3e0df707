#pragma once

#include <Eigen/Core>

namespace dyntex {

// An image sequence stored as one pixel matrix: column i is frame i
// vectorized in row-major pixel order (pixel (r, c) lands at row r*width + c).
// Intensities are dimensionless in [0, 1]. A valid sequence has at least two
// frames, since a dynamics model needs at least one transition.
class FrameSequence {
public:
  FrameSequence(Eigen::MatrixXd data, int height, int width);

  const Eigen::MatrixXd& data() const { return data_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int pixel_count() const { return static_cast<int>(data_.rows()); }
  int frame_count() const { return static_cast<int>(data_.cols()); }

  // Un-vectorizes column `index` back into a height×width image.
  Eigen::MatrixXd frame_image(int index) const;

private:
  Eigen::MatrixXd data_;
  int height_;
  int width_;
};

} // namespace dyntex
