#include "frame/range_image.hpp"

#include <algorithm>
#include <cmath>

namespace frame {

void ProjectionParams::validate() const {
  if (rows < 2) throw Error("depth image needs at least 2 rows");
  if (cols < 4) throw Error("depth image needs at least 4 columns");
  if (!(vertical_fov_deg > 0.0) || vertical_fov_deg > 180.0) {
    throw Error("vertical field of view must be in (0, 180] degrees");
  }
  if (!(max_range > 0.0)) throw Error("max_range must be positive");
}

DepthImage::DepthImage(const ProjectionParams& params) : params_(params) {
  params_.validate();
  ranges_.assign(static_cast<std::size_t>(params_.rows) * static_cast<std::size_t>(params_.cols),
                 0.0);
}

DepthImage DepthImage::circular_shift(int shift) const {
  DepthImage out(params_);
  const int w = params_.cols;
  const int s = ((shift % w) + w) % w;
  for (int r = 0; r < params_.rows; ++r) {
    for (int c = 0; c < w; ++c) out.at(r, (c + s) % w) = at(r, c);
  }
  return out;
}

namespace {

// Bin coordinates within rounding of a boundary snap onto it, so a point on a
// boundary lands in the same cell whatever yaw it was observed at.
int bin_of(double coordinate) {
  const double nearest = std::round(coordinate);
  if (std::abs(coordinate - nearest) <= 1e-9) coordinate = nearest;
  return static_cast<int>(std::floor(coordinate));
}

}  // namespace

DepthImage spherical_project(const PointCloud& scan, const ProjectionParams& params) {
  DepthImage image(params);
  scan.validate();

  const double half_fov = deg2rad(params.vertical_fov_deg) * 0.5;
  const double fov = 2.0 * half_fov;
  const double two_pi = 2.0 * kPi;

  for (const auto& p : scan.points) {
    const double range = p.norm();
    if (range <= 0.0 || range > params.max_range) continue;

    const double elevation = std::asin(std::clamp(p.z() / range, -1.0, 1.0));
    if (elevation > half_fov || elevation < -half_fov) continue;
    int row = bin_of((half_fov - elevation) / fov * params.rows);
    row = std::clamp(row, 0, params.rows - 1);

    double azimuth = std::atan2(p.y(), p.x());
    if (azimuth < 0.0) azimuth += two_pi;
    int col = bin_of(azimuth / two_pi * params.cols);
    if (col >= params.cols) col -= params.cols;

    double& cell = image.at(row, col);
    if (cell == 0.0 || range < cell) cell = range;
  }
  return image;
}

}  // namespace frame
