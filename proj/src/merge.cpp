#include "frame/merge.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

namespace frame {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct VoxelKeyHash {
  std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto v : k) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

using VoxelSet = std::unordered_set<std::array<std::int64_t, 3>, VoxelKeyHash>;

VoxelSet occupied_voxels(const PointCloud& cloud, const Transform& t, double voxel) {
  VoxelSet set;
  set.reserve(cloud.size() / 4 + 1);
  const double inv = 1.0 / voxel;
  for (const auto& p : cloud.points) {
    const Point3 q = t * p;
    set.insert({static_cast<std::int64_t>(std::floor(q.x() * inv)),
                static_cast<std::int64_t>(std::floor(q.y() * inv)),
                static_cast<std::int64_t>(std::floor(q.z() * inv))});
  }
  return set;
}

template <class F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(stage, e.what());
  }
}

}  // namespace

void RobotRun::validate() const {
  map.validate();
  trajectory.validate();
  for (const auto& r : records) {
    const Pose* pose = trajectory.find(r.timestep);
    if (pose == nullptr) {
      throw Error("descriptor record timestep " + std::to_string(r.timestep) +
                  " is missing from the trajectory");
    }
    if ((pose->position - r.position).norm() > 1e-6) {
      throw Error("descriptor record " + std::to_string(r.timestep) +
                  " position disagrees with the trajectory");
    }
  }
}

MergeResult merge_pair(const RobotRun& own, const RobotRun& incoming, const MergeOptions& options,
                       const std::optional<Transform>& ground_truth) {
  if (!(options.radius > 0.0)) throw PipelineError("config", "sphere radius must be positive");
  run_stage("config", [&] {
    options.registration.validate();
    return 0;
  });
  if (own.records.empty() || incoming.records.empty()) {
    throw PipelineError("overlap", "both runs need descriptor records");
  }

  MergeReport report;
  report.sphere_radius = options.radius;
  report.points_m1 = own.map.size();
  report.points_m2 = incoming.map.size();
  report.trajectory_length_m1 = own.trajectory.length();
  report.trajectory_length_m2 = incoming.trajectory.length();

  const auto start = Clock::now();

  auto t = Clock::now();
  const OverlapMatch match = run_stage("overlap", [&] {
    const DescriptorIndex index = build_index(own.records);
    return query_best_pair(index, incoming.records);
  });
  report.match = match;
  report.timings.query = seconds_since(t);

  t = Clock::now();
  const double yaw = run_stage("yaw", [&] {
    const auto find_w = [](const std::vector<DescriptorRecord>& recs, std::uint32_t k) {
      const auto it = std::find_if(recs.begin(), recs.end(),
                                   [k](const DescriptorRecord& r) { return r.timestep == k; });
      return it->w;
    };
    // The yaw that carries the incoming scene onto the own scene.
    return estimate_yaw(find_w(incoming.records, match.incoming_timestep),
                        find_w(own.records, match.own_timestep));
  });
  report.yaw = yaw;
  const Transform initial = initial_transform(match, yaw, options.initial_form);
  report.initial_transform = initial;
  report.timings.yaw = seconds_since(t);

  t = Clock::now();
  const PointCloud s1 = sample_sphere(own.map, {match.own_position, options.radius});
  const PointCloud s2 = sample_sphere(incoming.map, {match.incoming_position, options.radius});
  report.submap_points_m1 = s1.size();
  report.submap_points_m2 = s2.size();
  report.timings.sphere = seconds_since(t);

  t = Clock::now();
  const RegistrationResult reg = run_stage("registration", [&] {
    const CovariantCloud target = prepare_for_registration(s1, options.registration);
    const CovariantCloud source = prepare_for_registration(s2, options.registration);
    return gicp_register(source, target, initial, options.registration);
  });
  report.timings.registration = seconds_since(t);
  report.iterations = reg.iterations;
  report.converged = reg.converged;
  report.final_cost = reg.final_cost;
  report.correspondence_count = reg.correspondence_count;
  report.inlier_fraction = reg.inlier_fraction;
  if (reg.inlier_fraction < options.registration.min_inlier_fraction) {
    throw PipelineError("registration", "initial guess outside capture range (inlier fraction " +
                                            std::to_string(reg.inlier_fraction) + ")");
  }
  report.transform = reg.transform;
  report.timings.total = seconds_since(start);

  MergeResult result;
  result.merged.points.reserve(own.map.size() + incoming.map.size());
  result.merged.append(own.map);
  result.merged.append(apply(reg.transform, incoming.map));
  if (options.output_voxel > 0.0) {
    result.merged = voxel_downsample(result.merged, options.output_voxel);
  }

  if (ground_truth) {
    const ErrorPair err = transform_error(*ground_truth, report.transform);
    report.t_e = err.translation_error;
    report.r_e = err.rotation_error;
    report.r_e_frobenius = err.rotation_residual;
    report.overlap_percent =
        compute_overlap_percent(own.map, incoming.map, *ground_truth, options.overlap_voxel);
  }
  result.report = report;
  return result;
}

RobotRun absorb(const RobotRun& own, const RobotRun& incoming, const Transform& t12,
                const PointCloud& merged_map) {
  RobotRun out;
  out.map = merged_map;
  out.trajectory = own.trajectory;
  out.records = own.records;

  std::int64_t last = -1;
  for (const auto& p : own.trajectory.poses) last = std::max(last, p.timestep);
  for (const auto& r : own.records) last = std::max(last, static_cast<std::int64_t>(r.timestep));
  const std::int64_t offset = last + 1;

  const double yaw_offset = t12.yaw();
  for (const auto& p : incoming.trajectory.poses) {
    out.trajectory.poses.push_back(
        {p.timestep + offset, t12 * p.position, wrap_angle(p.yaw + yaw_offset)});
  }
  for (const auto& r : incoming.records) {
    DescriptorRecord moved = r;
    moved.position = t12 * r.position;
    moved.w = r.w.rotated(yaw_offset);
    moved.timestep = static_cast<std::uint32_t>(r.timestep + offset);
    out.records.push_back(moved);
  }
  return out;
}

RecursiveMergeResult merge_recursive(const std::vector<RobotRun>& runs, const MergeOptions& options,
                                     const std::vector<std::optional<Transform>>& ground_truths) {
  if (runs.size() < 2) throw PipelineError("config", "recursive merging needs at least two runs");
  RecursiveMergeResult out;
  out.accumulated = runs.front();
  out.merged = runs.front().map;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const std::optional<Transform> gt =
        i - 1 < ground_truths.size() ? ground_truths[i - 1] : std::nullopt;
    try {
      MergeResult step = merge_pair(out.accumulated, runs[i], options, gt);
      out.accumulated = absorb(out.accumulated, runs[i], step.report.transform, step.merged);
      out.merged = std::move(step.merged);
      out.reports.push_back(step.report);
    } catch (const PipelineError& e) {
      out.failure = e;
      break;
    }
  }
  return out;
}

double compute_overlap_percent(const PointCloud& m1, const PointCloud& m2, const Transform& gt,
                               double voxel) {
  if (!(voxel > 0.0)) throw Error("overlap voxel size must be positive");
  if (m1.empty() || m2.empty()) throw Error("overlap needs two non-empty clouds");
  const VoxelSet a = occupied_voxels(m1, Transform::identity(), voxel);
  const VoxelSet b = occupied_voxels(m2, gt, voxel);
  const VoxelSet& small = a.size() <= b.size() ? a : b;
  const VoxelSet& large = a.size() <= b.size() ? b : a;
  std::size_t common = 0;
  for (const auto& k : small) common += large.count(k);
  return 100.0 * static_cast<double>(common) / static_cast<double>(small.size());
}

}  // namespace frame
