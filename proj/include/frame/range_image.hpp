#pragma once

#include "frame/geometry.hpp"

#include <vector>

namespace frame {

struct ProjectionParams {
  int rows = 16;
  int cols = 256;
  double vertical_fov_deg = 20.0;
  double max_range = 50.0;

  void validate() const;
};

/// 360 degree spherical range image. Row 0 is the highest elevation bin,
/// column 0 starts at azimuth 0 (the +x axis) and increases counterclockwise.
/// Cells without a return hold exactly 0.0.
class DepthImage {
 public:
  DepthImage() = default;
  explicit DepthImage(const ProjectionParams& params);

  int rows() const { return params_.rows; }
  int cols() const { return params_.cols; }
  double vertical_fov_deg() const { return params_.vertical_fov_deg; }
  double max_range() const { return params_.max_range; }
  const ProjectionParams& params() const { return params_; }

  double at(int row, int col) const { return ranges_[index(row, col)]; }
  double& at(int row, int col) { return ranges_[index(row, col)]; }
  const std::vector<double>& ranges() const { return ranges_; }

  /// Copy rotated by `shift` columns: result(r, c) = this(r, c - shift).
  DepthImage circular_shift(int shift) const;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(params_.cols) +
           static_cast<std::size_t>(col);
  }

  ProjectionParams params_;
  std::vector<double> ranges_;
};

/// Bins every point by azimuth and elevation; a cell keeps the minimum range
/// of the points that land in it. Points outside the vertical field of view,
/// beyond max_range or at the origin are dropped. Throws on non-finite input.
DepthImage spherical_project(const PointCloud& scan, const ProjectionParams& params);

}  // namespace frame
