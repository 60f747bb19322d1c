#pragma once

#include "frame/descriptors.hpp"
#include "frame/geometry.hpp"
#include "frame/merge.hpp"
#include "frame/parallel.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace frame::sim {

/// Corridor between two junction nodes. Edges must be parallel to the x or
/// y axis.
struct CorridorEdge {
  int from = 0;
  int to = 0;
  double width = 5.0;   // nominal, meters
  double height = 4.0;  // nominal, meters
};

/// Planar tunnel network. Nodes are junction centers at floor level and
/// share one z.
struct WorldSpec {
  std::vector<Point3> nodes;
  std::vector<CorridorEdge> edges;
  /// Per-vertex relief of corridor surfaces, meters.
  double roughness = 0.1;
  /// Amplitude of the slow width/height undulation along each corridor.
  double profile_variation = 0.8;
  /// Mean distance between full-height wall niches along a corridor; 0
  /// disables them.
  double niche_spacing = 10.0;
  double niche_depth = 2.0;  // deepest niche, meters
  std::uint64_t seed = 0;

  void validate() const;
};

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

struct RayHit {
  double distance = 0.0;
  std::uint32_t triangle = 0;
};

/// Möller-Trumbore intersection; returns the distance along the (unit)
/// direction or nothing.
std::optional<double> intersect_triangle(const Point3& origin, const Point3& direction,
                                         const Point3& a, const Point3& b, const Point3& c);

/// Triangle soup with a bounding volume hierarchy for ray queries.
class World {
 public:
  World(WorldSpec spec, TriangleMesh mesh);

  const WorldSpec& spec() const { return spec_; }
  const TriangleMesh& mesh() const { return mesh_; }
  /// Hash of the spec; runs from different worlds have different ids.
  std::uint64_t id() const { return id_; }

  std::optional<RayHit> cast(const Point3& origin, const Point3& direction,
                             double max_distance) const;
  /// Brute-force variant of cast, kept as a reference for testing.
  std::optional<RayHit> cast_linear(const Point3& origin, const Point3& direction,
                                    double max_distance) const;
  bool in_free_space(const Point3& p) const;

 private:
  struct Node {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
    std::uint32_t first = 0;  // first triangle (leaf) or left child (inner)
    std::uint32_t count = 0;  // triangles in a leaf, 0 for inner nodes
    std::uint32_t right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);

  WorldSpec spec_;
  TriangleMesh mesh_;
  std::uint64_t id_ = 0;
  std::vector<std::uint32_t> tri_order_;
  std::vector<Node> nodes_;
};

/// Throws frame::Error for disconnected graphs, non-axis-aligned edges and
/// other invalid specs. Identical specs produce bitwise identical meshes.
World generate_world(const WorldSpec& spec);

struct ScanConfig {
  int channels = 16;
  double vertical_fov = 20.0;    // degrees, 20 or 30
  double horizontal_step = 0.7;  // degrees between rays of one ring
  double azimuth_offset = 0.0;   // degrees, azimuth of the first ray
  double max_range = 50.0;
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;
  double step_spacing = 1.0;      // meters between trajectory steps
  double keyframe_spacing = 2.0;  // meters between descriptor records
  /// Depth images for descriptors share one elevation grid across sensors
  /// and only see nearby structure.
  double descriptor_vertical_fov = 30.0;
  double descriptor_max_range = 10.0;
  bool keep_scans = false;

  void validate() const;
  /// Elevation of each channel in radians, highest first. Channels sit at
  /// the centers of the 16 projection rows.
  std::vector<double> channel_elevations() const;
  int rays_per_ring() const;
};

/// One 360 degree scan in the sensor frame. Noise is drawn from a stream
/// keyed by (config.seed, pose_index, ray index), so the result does not
/// depend on the thread count.
PointCloud simulate_scan(const World& world, const Transform& sensor_pose, const ScanConfig& config,
                         std::uint64_t pose_index, Execution exec = Execution::parallel);

/// Descriptor record for a sensor-frame scan taken at `local_pose`; the scan
/// is rotated into the map frame orientation before projection.
DescriptorRecord make_record(const PointCloud& sensor_scan, const Transform& local_pose,
                             double vertical_fov, double max_range, std::uint32_t timestep);

struct SimRun {
  RobotRun run;
  std::vector<Transform> true_poses;  // world frame, one per trajectory step
  Transform frame_offset;             // world -> local map frame
  std::vector<PointCloud> scans;      // sensor frame, when keep_scans is set
  std::uint64_t world_id = 0;
  ScanConfig config;
};

/// Waypoints are sensor positions in the world frame.
SimRun simulate_run(const World& world, std::span<const Point3> waypoints, const ScanConfig& config,
                    const Transform& local_frame, Execution exec = Execution::parallel);

/// Transform carrying b's local map into a's local map frame.
Transform ground_truth_transform(const SimRun& a, const SimRun& b);

struct RunSpec {
  std::string name;
  std::vector<Point3> waypoints;
  ScanConfig scan;
  Transform local_frame;
};

struct ScenarioSpec {
  std::string name;
  WorldSpec world;
  std::vector<RunSpec> runs;
  double radius = 10.0;
};

struct Scenario {
  World world;
  std::vector<SimRun> runs;
};

/// Two overlapping tunnel runs (about 146 m and 246 m) with 30 and 20 degree
/// sensors and local frames rotated 180 degrees apart.
ScenarioSpec fig3_scenario(std::uint64_t seed);
/// Four runs over a mine-like network, merged left to right with a 15 m
/// sphere. Later runs overlap only territory that is already merged.
ScenarioSpec fig4_scenario(std::uint64_t seed);
/// A world that shares no geometry with fig3_scenario's world.
ScenarioSpec disjoint_scenario(std::uint64_t seed);
ScenarioSpec scenario_by_name(const std::string& name, std::uint64_t seed);

Scenario simulate_scenario(const ScenarioSpec& spec, Execution exec = Execution::parallel);

/// Deterministic standard normal sample for a (seed, stream, index) key.
double keyed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);
/// Deterministic uniform sample in [0, 1).
double keyed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

}  // namespace frame::sim
