#pragma once

#include "frame/descriptors.hpp"
#include "frame/geometry.hpp"
#include "frame/merge.hpp"
#include "frame/range_image.hpp"
#include "frame/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace frame::io {

/// Malformed input. `offset` is the byte position of the problem when it is
/// known.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::optional<std::size_t> offset, const std::string& message);
  const std::string& source() const { return source_; }
  std::optional<std::size_t> offset() const { return offset_; }

 private:
  std::string source_;
  std::optional<std::size_t> offset_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

enum class PcdEncoding { ascii, binary };

// PCD v0.7 with float x y z. The reader also accepts extra fields and F8
// coordinates.
std::string encode_pcd(const PointCloud& cloud, PcdEncoding encoding);
PointCloud decode_pcd(const std::string& bytes, const std::string& source);
void write_pcd(const std::filesystem::path& path, const PointCloud& cloud,
               PcdEncoding encoding = PcdEncoding::binary);
PointCloud read_pcd(const std::filesystem::path& path);

/// Header `k,x,y,z,yaw`, 17 significant digits.
std::string encode_trajectory(const Trajectory& trajectory);
Trajectory decode_trajectory(const std::string& bytes, const std::string& source);
void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory read_trajectory(const std::filesystem::path& path);

inline constexpr std::uint16_t kFrdsVersion = 1;

/// Magic "FRDS", u16 version, u32 count, then per record u32 k, 3 f64
/// position, 64 f32 q, 64 f32 w. Little-endian.
std::string encode_frds(const std::vector<DescriptorRecord>& records);
std::vector<DescriptorRecord> decode_frds(const std::string& bytes, const std::string& source);
void write_frds(const std::filesystem::path& path, const std::vector<DescriptorRecord>& records);
std::vector<DescriptorRecord> read_frds(const std::filesystem::path& path);

/// 16-bit binary PGM, millimeters.
std::string encode_pgm(const DepthImage& image);
/// Binary STL of a triangle mesh.
std::string encode_stl(const sim::TriangleMesh& mesh);

nlohmann::json transform_to_json(const Transform& t);
Transform transform_from_json(const nlohmann::json& j, const std::string& source);

nlohmann::json report_to_json(const MergeReport& report);
nlohmann::json options_to_json(const MergeOptions& options);
/// Output of `merge` or `merge-recursive`, parsed back for evaluation.
struct ReportSummary {
  Transform transform;
  std::size_t points_m1 = 0;
  std::size_t points_m2 = 0;
  double trajectory_length_m1 = 0.0;
  double trajectory_length_m2 = 0.0;
  std::optional<double> overlap_percent;
  std::optional<double> t_e;
  std::optional<double> r_e;
  double total_time = 0.0;
};
std::vector<ReportSummary> summaries_from_json(const nlohmann::json& j, const std::string& source);

nlohmann::json scenario_to_json(const sim::ScenarioSpec& spec);
sim::ScenarioSpec scenario_from_json(const nlohmann::json& j, const std::string& source);
nlohmann::json world_to_json(const sim::WorldSpec& world);
sim::WorldSpec world_from_json(const nlohmann::json& j, const std::string& source);
nlohmann::json run_spec_to_json(const sim::RunSpec& run);
sim::RunSpec run_spec_from_json(const nlohmann::json& j, const std::string& source);

/// Ground truth sidecar: every later run is related to the first one, in
/// the order merge_recursive folds them.
nlohmann::json ground_truth_sidecar(const sim::ScenarioSpec& spec, const sim::Scenario& scenario);
/// Accepts a sidecar or a bare {"transform": [...]} object.
std::vector<Transform> ground_truths_from_json(const nlohmann::json& j, const std::string& source);

nlohmann::json parse_json(const std::string& bytes, const std::string& source);
nlohmann::json read_json(const std::filesystem::path& path);
/// Sorted keys, two-space indent, trailing newline.
std::string dump_json(const nlohmann::json& j);

/// Files of one exported run: <prefix>.pcd, <prefix>_trajectory.csv,
/// <prefix>.frds.
struct RunFiles {
  std::filesystem::path map;
  std::filesystem::path trajectory;
  std::filesystem::path descriptors;
};
RunFiles run_files(const std::filesystem::path& prefix);
void write_run(const std::filesystem::path& prefix, const RobotRun& run);
RobotRun read_run(const RunFiles& files);

}  // namespace frame::io
