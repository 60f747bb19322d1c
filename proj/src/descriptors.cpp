#include "frame/descriptors.hpp"

#include <cmath>
#include <algorithm>

namespace frame {

namespace {

struct Twiddles {
  std::array<double, kDescriptorCols> cosine{};
  std::array<double, kDescriptorCols> sine{};

  Twiddles() {
    for (int n = 0; n < kDescriptorCols; ++n) {
      const double angle = 2.0 * kPi * n / kDescriptorCols;
      cosine[static_cast<std::size_t>(n)] = std::cos(angle);
      sine[static_cast<std::size_t>(n)] = std::sin(angle);
    }
  }
};

const Twiddles& twiddles() {
  static const Twiddles table;
  return table;
}

}  // namespace

double QueryDescriptor::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

bool QueryDescriptor::is_zero() const {
  for (double v : values) {
    if (v != 0.0) return false;
  }
  return true;
}

bool OrientDescriptor::is_zero() const {
  for (double v : values) {
    if (v != 0.0) return false;
  }
  return true;
}

OrientDescriptor OrientDescriptor::circular_shift(int shift) const {
  OrientDescriptor out;
  const int s = ((shift % kDescriptorSize) + kDescriptorSize) % kDescriptorSize;
  for (int i = 0; i < kDescriptorSize; ++i) {
    out.values[static_cast<std::size_t>((i + s) % kDescriptorSize)] =
        values[static_cast<std::size_t>(i)];
  }
  return out;
}

OrientDescriptor OrientDescriptor::rotated(double yaw) const {
  const double shift = yaw / (2.0 * kPi) * kDescriptorSize;
  OrientDescriptor out;
  for (int i = 0; i < kDescriptorSize; ++i) {
    // out[i] = values[i - shift], sampled between the two neighboring groups.
    const double src = i - shift;
    const double base = std::floor(src);
    const double frac = src - base;
    const int lo = ((static_cast<int>(base) % kDescriptorSize) + kDescriptorSize) % kDescriptorSize;
    const int hi = (lo + 1) % kDescriptorSize;
    out.values[static_cast<std::size_t>(i)] = (1.0 - frac) * values[static_cast<std::size_t>(lo)] +
                                              frac * values[static_cast<std::size_t>(hi)];
  }
  return out;
}

ProjectionParams descriptor_projection(double vertical_fov_deg, double max_range) {
  ProjectionParams p;
  p.rows = kDescriptorRows;
  p.cols = kDescriptorCols;
  p.vertical_fov_deg = vertical_fov_deg;
  p.max_range = max_range;
  return p;
}

std::pair<QueryDescriptor, OrientDescriptor> extract_descriptors(const DepthImage& image) {
  if (image.rows() != kDescriptorRows || image.cols() != kDescriptorCols) {
    throw Error("descriptor extraction needs a 16x256 depth image, got " +
                std::to_string(image.rows()) + "x" + std::to_string(image.cols()));
  }

  OrientDescriptor w;
  const double cells_per_group = static_cast<double>(kDescriptorRows * kColumnsPerGroup);
  for (int g = 0; g < kDescriptorSize; ++g) {
    double sum = 0.0;
    for (int r = 0; r < kDescriptorRows; ++r) {
      for (int c = g * kColumnsPerGroup; c < (g + 1) * kColumnsPerGroup; ++c) sum += image.at(r, c);
    }
    w.values[static_cast<std::size_t>(g)] = sum / cells_per_group;
  }

  QueryDescriptor q;
  const auto& tw = twiddles();
  constexpr int kHarmonics = kLastHarmonic - kFirstHarmonic + 1;
  for (int r = 0; r < kDescriptorRows; ++r) {
    for (int h = 0; h < kHarmonics; ++h) {
      const int f = kFirstHarmonic + h;
      double re = 0.0;
      double im = 0.0;
      for (int n = 0; n < kDescriptorCols; ++n) {
        const double x = image.at(r, n);
        if (x == 0.0) continue;
        const auto t = static_cast<std::size_t>((f * n) % kDescriptorCols);
        re += x * tw.cosine[t];
        im -= x * tw.sine[t];
      }
      q.values[static_cast<std::size_t>(r * kHarmonics + h)] = std::hypot(re, im);
    }
  }

  // Constant rings leave round-off sized residue in the harmonic bins.
  double max_range = 0.0;
  for (double v : image.ranges()) max_range = std::max(max_range, v);
  const double noise_floor = 1e-12 * std::max(1.0, max_range) * kDescriptorCols;
  double norm_sq = 0.0;
  for (double& v : q.values) {
    if (v <= noise_floor) v = 0.0;
    norm_sq += v * v;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : q.values) v *= inv;
  }
  return {q, w};
}

std::array<double, kDescriptorSize> circular_correlation(const OrientDescriptor& w1,
                                                         const OrientDescriptor& w2) {
  std::array<double, kDescriptorSize> corr{};
  for (int s = 0; s < kDescriptorSize; ++s) {
    double sum = 0.0;
    for (int i = 0; i < kDescriptorSize; ++i) {
      sum += w1.values[static_cast<std::size_t>(i)] *
             w2.values[static_cast<std::size_t>((i + s) % kDescriptorSize)];
    }
    corr[static_cast<std::size_t>(s)] = sum;
  }
  return corr;
}

double estimate_yaw(const OrientDescriptor& w1, const OrientDescriptor& w2) {
  if (w1.is_zero() || w2.is_zero()) throw Error("degenerate orientation descriptor");

  const auto corr = circular_correlation(w1, w2);
  double peak = corr[0];
  for (double c : corr) peak = std::max(peak, c);
  const double tie_tolerance = 1e-12 * std::abs(peak);

  const double bin = 2.0 * kPi / kDescriptorSize;
  double best_angle = 0.0;
  bool found = false;
  for (int s = 0; s < kDescriptorSize; ++s) {
    if (corr[static_cast<std::size_t>(s)] < peak - tie_tolerance) continue;
    const int signed_shift = s > kDescriptorSize / 2 ? s - kDescriptorSize : s;
    const double angle = signed_shift * bin;
    if (!found || std::abs(angle) < std::abs(best_angle) ||
        (std::abs(angle) == std::abs(best_angle) && angle > best_angle)) {
      best_angle = angle;
      found = true;
    }
  }
  return best_angle;
}

}  // namespace frame
