#pragma once

#include "frame/descriptors.hpp"
#include "frame/geometry.hpp"
#include "frame/kdtree.hpp"
#include "frame/parallel.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace frame {

struct OverlapMatch {
  std::uint32_t own_timestep = 0;
  std::uint32_t incoming_timestep = 0;
  Point3 own_position = Point3::Zero();
  Point3 incoming_position = Point3::Zero();
  double descriptor_distance = 0.0;
};

/// Nearest-neighbor index over a robot's own query descriptors. Records are
/// kept sorted by timestep so that equal distances resolve to the smallest
/// timestep. Immutable after construction and safe to query concurrently.
class DescriptorIndex {
 public:
  explicit DescriptorIndex(std::vector<DescriptorRecord> records);

  std::size_t size() const { return records_.size(); }
  const std::vector<DescriptorRecord>& records() const { return records_; }
  bool all_zero() const { return all_zero_; }

  struct Hit {
    std::size_t record = 0;  // position in records()
    double squared_distance = 0.0;
  };
  Hit nearest(const QueryDescriptor& q) const;

  /// q vectors as columns, in records() order, with their squared norms.
  using Columns = Eigen::Matrix<double, kDescriptorSize, Eigen::Dynamic>;
  const Columns& columns() const { return columns_; }
  const Eigen::VectorXd& squared_norms() const { return squared_norms_; }

 private:
  std::vector<DescriptorRecord> records_;
  KdTree<kDescriptorSize> tree_;
  Columns columns_;
  Eigen::VectorXd squared_norms_;
  bool all_zero_ = true;
};

/// Throws frame::Error on an empty record list.
DescriptorIndex build_index(std::vector<DescriptorRecord> records);

/// Pair (own, incoming) with the smallest Euclidean distance between query
/// descriptors over every incoming record; ties go to the smaller own
/// timestep, then the smaller incoming timestep. The parallel and serial
/// paths return the same match for any thread count.
OverlapMatch query_best_pair(const DescriptorIndex& index,
                             std::span<const DescriptorRecord> incoming,
                             Execution exec = Execution::parallel);

/// The k best (own, incoming) pairs, one per incoming record, in match order.
/// Diagnostic only; the pipeline uses query_best_pair.
std::vector<OverlapMatch> query_top_pairs(const DescriptorIndex& index,
                                          std::span<const DescriptorRecord> incoming,
                                          std::size_t k);

enum class InitialTransformForm {
  /// Trans(p_own) * Rz(yaw) * Trans(-p_incoming): rotates about the matched
  /// incoming position, then moves it onto the own position.
  about_matched_pose,
  /// [Rz(yaw) | p_own - p_incoming] applied about the map origin.
  raw,
};

Transform initial_transform(const OverlapMatch& match, double yaw,
                            InitialTransformForm form = InitialTransformForm::about_matched_pose);

}  // namespace frame
