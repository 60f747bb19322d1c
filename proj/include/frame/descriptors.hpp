#pragma once

#include "frame/geometry.hpp"
#include "frame/range_image.hpp"

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace frame {

inline constexpr int kDescriptorSize = 64;
inline constexpr int kDescriptorRows = 16;
inline constexpr int kDescriptorCols = 256;
/// Lowest and highest DFT bins kept per ring.
inline constexpr int kFirstHarmonic = 1;
inline constexpr int kLastHarmonic = 4;
inline constexpr int kColumnsPerGroup = kDescriptorCols / kDescriptorSize;

using DescriptorVector = std::array<double, kDescriptorSize>;

/// Heading-invariant place signature: unit L2 norm, or all zeros when the
/// scene carries no azimuthal structure.
struct QueryDescriptor {
  DescriptorVector values{};
  double norm() const;
  bool is_zero() const;
};

/// Azimuthal range profile in meters; a rotation of the scan shifts it.
struct OrientDescriptor {
  DescriptorVector values{};
  bool is_zero() const;
  /// result[(i + shift) mod 64] = values[i]
  OrientDescriptor circular_shift(int shift) const;
  /// Profile of the scene rotated by `yaw` about z; fractional group shifts
  /// are linearly interpolated.
  OrientDescriptor rotated(double yaw) const;
};

struct DescriptorRecord {
  QueryDescriptor q;
  OrientDescriptor w;
  Point3 position = Point3::Zero();
  std::uint32_t timestep = 0;
};

/// Computes (q, w) from a 16x256 depth image.
///
/// w[g] is the mean over all rows and the four columns 4g..4g+3 with
/// no-return cells counted as zero. q concatenates, ring by ring, the DFT
/// magnitudes of harmonics 1..4 of each row, then is L2-normalized.
/// Throws frame::Error for any other image shape.
std::pair<QueryDescriptor, OrientDescriptor> extract_descriptors(const DepthImage& image);

/// Yaw that rotates the scene of w1 onto the scene of w2, i.e. the argmax
/// shift s of sum_i w1[i] * w2[(i + s) mod 64], as an angle in (-pi, pi].
/// Ties go to the smallest |angle|, then to the positive one. Throws when
/// either profile is all zero.
double estimate_yaw(const OrientDescriptor& w1, const OrientDescriptor& w2);

/// Full cross-correlation table used by estimate_yaw.
std::array<double, kDescriptorSize> circular_correlation(const OrientDescriptor& w1,
                                                         const OrientDescriptor& w2);

/// Projection settings that produce the descriptor image for a sensor with
/// the given vertical field of view.
ProjectionParams descriptor_projection(double vertical_fov_deg, double max_range);

}  // namespace frame
