#include "frame/sim.hpp"

#include <algorithm>
#include <cmath>

namespace frame::sim {

void ScanConfig::validate() const {
  if (channels != 16) throw Error("scan config needs 16 channels");
  if (vertical_fov != 20.0 && vertical_fov != 30.0) {
    throw Error("vertical field of view must be 20 or 30 degrees");
  }
  if (!(horizontal_step > 0.0) || horizontal_step > 45.0) {
    throw Error("horizontal step must be in (0, 45] degrees");
  }
  if (!std::isfinite(azimuth_offset)) throw Error("azimuth offset must be finite");
  if (!(max_range > 0.0)) throw Error("max range must be positive");
  if (!(noise_sigma >= 0.0)) throw Error("noise sigma must be >= 0");
  if (!(descriptor_vertical_fov > 0.0) || !(descriptor_max_range > 0.0)) {
    throw Error("descriptor projection needs a positive field of view and range");
  }
  if (!(step_spacing > 0.0) || !(keyframe_spacing > 0.0)) {
    throw Error("step and keyframe spacing must be positive");
  }
}

std::vector<double> ScanConfig::channel_elevations() const {
  std::vector<double> out(static_cast<std::size_t>(channels));
  const double fov = deg2rad(vertical_fov);
  for (int i = 0; i < channels; ++i) {
    out[static_cast<std::size_t>(i)] = 0.5 * fov - (i + 0.5) * fov / channels;
  }
  return out;
}

int ScanConfig::rays_per_ring() const {
  return std::max(1, static_cast<int>(std::lround(360.0 / horizontal_step)));
}

PointCloud simulate_scan(const World& world, const Transform& sensor_pose, const ScanConfig& config,
                         std::uint64_t pose_index, Execution exec) {
  config.validate();
  const auto elevations = config.channel_elevations();
  const int per_ring = config.rays_per_ring();
  const auto total = static_cast<std::size_t>(config.channels) * static_cast<std::size_t>(per_ring);
  std::vector<Point3> hits(total);
  std::vector<std::uint8_t> valid(total, 0);
  const Matrix3& r = sensor_pose.rotation();
  const Point3& origin = sensor_pose.translation();

  for_each_index(total, exec, [&](std::size_t ray) {
    const auto ring = ray / static_cast<std::size_t>(per_ring);
    const auto j = ray % static_cast<std::size_t>(per_ring);
    const double el = elevations[ring];
    const double az = deg2rad(config.azimuth_offset + static_cast<double>(j) * config.horizontal_step);
    const Point3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    const auto hit = world.cast(origin, r * dir, config.max_range);
    if (!hit) return;
    double range = hit->distance;
    if (config.noise_sigma > 0.0) {
      range += config.noise_sigma * keyed_normal(config.seed, pose_index, ray);
    }
    if (!(range > 0.0) || range > config.max_range) return;
    hits[ray] = dir * range;
    valid[ray] = 1;
  });

  PointCloud scan;
  scan.points.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    if (valid[i]) scan.points.push_back(hits[i]);
  }
  return scan;
}

DescriptorRecord make_record(const PointCloud& sensor_scan, const Transform& local_pose,
                             double vertical_fov, double max_range, std::uint32_t timestep) {
  const Transform orientation(local_pose.rotation(), Point3::Zero());
  const DepthImage image =
      spherical_project(apply(orientation, sensor_scan), descriptor_projection(vertical_fov, max_range));
  auto [q, w] = extract_descriptors(image);
  DescriptorRecord record;
  record.q = q;
  record.w = w;
  record.position = local_pose.translation();
  record.timestep = timestep;
  return record;
}

namespace {

struct Sample {
  Point3 position;
  double heading = 0.0;
  double distance = 0.0;
};

std::vector<Sample> sample_polyline(std::span<const Point3> waypoints, double spacing) {
  std::vector<double> cumulative{0.0};
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    cumulative.push_back(cumulative.back() + (waypoints[i] - waypoints[i - 1]).norm());
  }
  const double total = cumulative.back();
  std::vector<Sample> out;
  std::size_t seg = 1;
  for (std::size_t k = 0;; ++k) {
    const double s = static_cast<double>(k) * spacing;
    if (s > total + 1e-9) break;
    while (seg + 1 < waypoints.size() && s >= cumulative[seg]) ++seg;
    const Point3 a = waypoints[seg - 1];
    const Point3 b = waypoints[seg];
    const double len = cumulative[seg] - cumulative[seg - 1];
    const double f = len > 0.0 ? std::clamp((s - cumulative[seg - 1]) / len, 0.0, 1.0) : 0.0;
    const Point3 d = b - a;
    out.push_back({a + f * d, std::atan2(d.y(), d.x()), s});
  }
  return out;
}

}  // namespace

SimRun simulate_run(const World& world, std::span<const Point3> waypoints, const ScanConfig& config,
                    const Transform& local_frame, Execution exec) {
  config.validate();
  if (waypoints.size() < 2) throw Error("a run needs at least two waypoints");
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    if (!world.in_free_space(waypoints[i])) {
      throw Error("waypoint " + std::to_string(i) + " is outside free space");
    }
    if (i > 0 && (waypoints[i] - waypoints[i - 1]).norm() == 0.0) {
      throw Error("waypoint " + std::to_string(i) + " repeats its predecessor");
    }
  }

  SimRun out;
  out.frame_offset = local_frame;
  out.world_id = world.id();
  out.config = config;

  const auto samples = sample_polyline(waypoints, config.step_spacing);
  double next_keyframe = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Sample& s = samples[k];
    const Transform true_pose = Transform::from_yaw_translation(s.heading, s.position);
    const Transform local_pose = local_frame * true_pose;
    const PointCloud scan = simulate_scan(world, true_pose, config, k, exec);

    out.true_poses.push_back(true_pose);
    out.run.trajectory.poses.push_back(
        {static_cast<std::int64_t>(k), local_pose.translation(), local_pose.yaw()});
    out.run.map.append(apply(local_pose, scan));
    if (s.distance >= next_keyframe - 1e-9) {
      out.run.records.push_back(make_record(scan, local_pose, config.descriptor_vertical_fov,
                                            config.descriptor_max_range,
                                            static_cast<std::uint32_t>(k)));
      next_keyframe += config.keyframe_spacing;
    }
    if (config.keep_scans) out.scans.push_back(scan);
  }
  return out;
}

Transform ground_truth_transform(const SimRun& a, const SimRun& b) {
  if (a.world_id != b.world_id) throw Error("runs come from different worlds");
  return a.frame_offset * b.frame_offset.inverse();
}

namespace {

CorridorEdge edge(std::uint64_t seed, int index, int from, int to) {
  const auto i = static_cast<std::uint64_t>(index);
  return {from, to, 4.0 + 4.0 * keyed_uniform(seed, 50, i), 3.5 + 2.0 * keyed_uniform(seed, 51, i)};
}

Transform random_frame(std::uint64_t seed, std::uint64_t stream, const Point3& start, double yaw) {
  const Matrix3 r = yaw_rotation(yaw);
  const Point3 jitter(4.0 * keyed_uniform(seed, stream, 1) - 2.0, 4.0 * keyed_uniform(seed, stream, 2) - 2.0,
                      0.0);
  return Transform(r, -(r * start) + jitter);
}

ScanConfig scan_config(std::uint64_t seed, double vfov) {
  ScanConfig c;
  c.vertical_fov = vfov;
  c.seed = seed;
  return c;
}

}  // namespace

ScenarioSpec fig3_scenario(std::uint64_t seed) {
  ScenarioSpec s;
  s.name = "fig3";
  s.radius = 10.0;
  s.world.seed = seed;
  s.world.nodes = {{0, 0, 0}, {60, 0, 0}, {120, 0, 0}, {60, 40, 0}, {120, -50, 0}, {180, 0, 0}, {180, 70, 0}};
  const std::vector<std::pair<int, int>> links{{0, 1}, {1, 2}, {1, 3}, {2, 4}, {2, 5}, {5, 6}};
  for (std::size_t i = 0; i < links.size(); ++i) {
    s.world.edges.push_back(edge(seed, static_cast<int>(i), links[i].first, links[i].second));
  }

  const double theta = 2.0 * kPi * keyed_uniform(seed, 60, 0) - kPi;
  RunSpec a;
  a.name = "run_a";
  a.scan = scan_config(seed * 2 + 1, 30.0);
  a.waypoints = {{60, 38, 1.5}, {60, 0, 1.5}, {120, 0, 1.5}, {120, -48, 1.5}};
  a.local_frame = random_frame(seed, 61, a.waypoints.front(), theta);
  RunSpec b;
  b.name = "run_b";
  b.scan = scan_config(seed * 2 + 2, 20.0);
  b.waypoints = {{1.0 + 2.0 * keyed_uniform(seed, 63, 0), 0, 1.5}, {180, 0, 1.5}, {180, 68, 1.5}};
  b.local_frame = random_frame(seed, 62, b.waypoints.front(), wrap_angle(theta + kPi));
  s.runs = {a, b};
  return s;
}

ScenarioSpec fig4_scenario(std::uint64_t seed) {
  ScenarioSpec s;
  s.name = "fig4";
  s.radius = 15.0;
  s.world.seed = seed;
  s.world.nodes = {{0, 0, 0},   {50, 0, 0},  {100, 0, 0},  {150, 0, 0},
                   {200, 0, 0}, {50, 60, 0}, {150, -60, 0}, {100, 50, 0}};
  const std::vector<std::pair<int, int>> links{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {1, 5}, {3, 6}, {2, 7}};
  for (std::size_t i = 0; i < links.size(); ++i) {
    s.world.edges.push_back(edge(seed, static_cast<int>(i), links[i].first, links[i].second));
  }
  const std::vector<std::vector<Point3>> paths{
      {{2, 0, 1.5}, {100, 0, 1.5}, {100, 48, 1.5}},
      {{60, 0, 1.5}, {198, 0, 1.5}},
      {{50, 58, 1.5}, {50, 0, 1.5}, {10, 0, 1.5}},
      {{150, -58, 1.5}, {150, 0, 1.5}, {180, 0, 1.5}},
  };
  for (std::size_t i = 0; i < paths.size(); ++i) {
    RunSpec r;
    r.name = "run_" + std::to_string(i + 1);
    r.scan = scan_config(seed * 4 + i + 1, 30.0);
    r.waypoints = paths[i];
    const double yaw = 2.0 * kPi * keyed_uniform(seed, 70 + i, 0) - kPi;
    r.local_frame = random_frame(seed, 80 + i, r.waypoints.front(), yaw);
    s.runs.push_back(r);
  }
  return s;
}

ScenarioSpec disjoint_scenario(std::uint64_t seed) {
  ScenarioSpec s;
  s.name = "disjoint";
  s.radius = 10.0;
  s.world.seed = seed ^ 0x5a5a5a5aull;
  s.world.roughness = 0.3;
  s.world.nodes = {{0, 0, 0}, {30, 0, 0}, {30, 30, 0}, {70, 30, 0}, {70, -20, 0}};
  const std::vector<std::pair<int, int>> links{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  for (std::size_t i = 0; i < links.size(); ++i) {
    s.world.edges.push_back({links[i].first, links[i].second,
                             9.0 + keyed_uniform(seed, 90, i), 3.0 + 0.2 * keyed_uniform(seed, 91, i)});
  }
  RunSpec r;
  r.name = "run_disjoint";
  r.scan = scan_config(seed * 3 + 7, 20.0);
  r.waypoints = {{2, 0, 1.2}, {30, 0, 1.2}, {30, 30, 1.2}, {70, 30, 1.2}, {70, -18, 1.2}};
  r.local_frame = random_frame(seed, 92, r.waypoints.front(), 2.0 * kPi * keyed_uniform(seed, 93, 0) - kPi);
  s.runs = {r};
  return s;
}

ScenarioSpec scenario_by_name(const std::string& name, std::uint64_t seed) {
  if (name == "fig3") return fig3_scenario(seed);
  if (name == "fig4") return fig4_scenario(seed);
  if (name == "disjoint") return disjoint_scenario(seed);
  throw Error("unknown scenario '" + name + "'");
}

Scenario simulate_scenario(const ScenarioSpec& spec, Execution exec) {
  Scenario out{generate_world(spec.world), {}};
  for (const auto& r : spec.runs) {
    out.runs.push_back(simulate_run(out.world, r.waypoints, r.scan, r.local_frame, exec));
  }
  return out;
}

}  // namespace frame::sim
