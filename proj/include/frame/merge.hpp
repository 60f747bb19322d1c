#pragma once

#include "frame/descriptors.hpp"
#include "frame/geometry.hpp"
#include "frame/overlap_index.hpp"
#include "frame/registration.hpp"

#include <optional>
#include <string>
#include <vector>

namespace frame {

/// One robot's contribution: its map, trajectory and descriptor records, all
/// in the robot's local map frame.
struct RobotRun {
  PointCloud map;
  Trajectory trajectory;
  std::vector<DescriptorRecord> records;

  /// Throws when a record has no pose with the same timestep and position.
  void validate() const;
};

/// Pipeline failure tagged with the stage that raised it.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)), detail_(message) {}
  const std::string& stage() const { return stage_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string stage_;
  std::string detail_;
};

struct StageTimings {
  double query = 0.0;
  double yaw = 0.0;
  double sphere = 0.0;
  double registration = 0.0;
  double total = 0.0;
};

struct MergeReport {
  Transform transform;          // T12, incoming map frame -> own map frame
  Transform initial_transform;  // T0
  double yaw = 0.0;             // regressed yaw discrepancy, radians
  std::size_t points_m1 = 0;
  std::size_t points_m2 = 0;
  double trajectory_length_m1 = 0.0;
  double trajectory_length_m2 = 0.0;
  std::optional<double> overlap_percent;
  std::optional<double> t_e;
  std::optional<double> r_e;
  std::optional<double> r_e_frobenius;
  StageTimings timings;
  double sphere_radius = 0.0;
  OverlapMatch match;
  std::size_t submap_points_m1 = 0;
  std::size_t submap_points_m2 = 0;
  int iterations = 0;
  bool converged = false;
  double final_cost = 0.0;
  std::size_t correspondence_count = 0;
  double inlier_fraction = 0.0;
};

struct MergeOptions {
  double radius = 10.0;
  RegistrationParams registration;
  InitialTransformForm initial_form = InitialTransformForm::about_matched_pose;
  /// Voxel size used for the overlap percentage when ground truth is given.
  double overlap_voxel = 1.0;
  /// Optional voxel filter on the merged output; 0 keeps the plain union.
  double output_voxel = 0.0;
};

struct MergeResult {
  PointCloud merged;  // M1 followed by T12 * M2
  MergeReport report;
};

/// Egocentric merge: the own run's descriptors are indexed and queried with
/// the incoming run's descriptors.
MergeResult merge_pair(const RobotRun& own, const RobotRun& incoming, const MergeOptions& options,
                       const std::optional<Transform>& ground_truth = std::nullopt);

struct RecursiveMergeResult {
  PointCloud merged;
  RobotRun accumulated;
  std::vector<MergeReport> reports;
  /// Set when a fold failed; reports holds the steps completed before it.
  std::optional<PipelineError> failure;
};

/// Folds merge_pair left to right. ground_truths[i], when present, is the
/// transform from runs[i + 1]'s frame into runs[0]'s frame.
RecursiveMergeResult merge_recursive(const std::vector<RobotRun>& runs, const MergeOptions& options,
                                     const std::vector<std::optional<Transform>>& ground_truths = {});

/// Run produced by absorbing `incoming` into `own` with transform t12.
/// Incoming timesteps are renumbered after the own run's last timestep.
RobotRun absorb(const RobotRun& own, const RobotRun& incoming, const Transform& t12,
                const PointCloud& merged_map);

/// 100 * |V(m1) & V(gt * m2)| / min(|V(m1)|, |V(gt * m2)|) with V the set of
/// occupied voxels of side `voxel`.
double compute_overlap_percent(const PointCloud& m1, const PointCloud& m2, const Transform& gt,
                               double voxel);

}  // namespace frame
