#include "frame/descriptors.hpp"
#include "frame/io.hpp"
#include "frame/merge.hpp"
#include "frame/parallel.hpp"
#include "frame/range_image.hpp"
#include "frame/sim.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitPipeline = 2;

struct MergeFlags {
  double radius = 10.0;
  double max_corr_dist = 1.0;
  double voxel_leaf = 0.25;
  double merged_voxel = 0.0;
  std::string out = ".";
  std::string gt;
  bool raw_initial = false;
};

void add_merge_flags(CLI::App* cmd, MergeFlags& f) {
  cmd->add_option("--radius", f.radius, "Sphere radius for submap sampling (m)")->capture_default_str();
  cmd->add_option("--max-corr-dist", f.max_corr_dist, "GICP correspondence distance (m)")
      ->capture_default_str();
  cmd->add_option("--voxel-leaf", f.voxel_leaf, "Voxel leaf before GICP, 0 disables (m)")
      ->capture_default_str();
  cmd->add_option("--merged-voxel", f.merged_voxel, "Voxel filter on the merged map, 0 keeps the union (m)")
      ->capture_default_str();
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--gt", f.gt, "Ground truth sidecar or {\"transform\": [...]} file");
  cmd->add_flag("--raw-initial", f.raw_initial, "Use the untransformed initial guess (R_z(yaw), p1 - p2)");
}

frame::MergeOptions merge_options(const MergeFlags& f) {
  frame::MergeOptions o;
  o.radius = f.radius;
  o.registration.max_correspondence_distance = f.max_corr_dist;
  o.registration.voxel_leaf = f.voxel_leaf;
  o.output_voxel = f.merged_voxel;
  o.initial_form = f.raw_initial ? frame::InitialTransformForm::raw : frame::InitialTransformForm::about_matched_pose;
  if (!(o.radius > 0.0)) throw frame::io::ParseError("--radius", std::nullopt, "must be positive");
  try {
    o.registration.validate();
  } catch (const frame::Error& e) {
    throw frame::io::ParseError("registration flags", std::nullopt, e.what());
  }
  return o;
}

std::vector<frame::Transform> load_ground_truths(const std::string& path) {
  if (path.empty()) return {};
  return frame::io::ground_truths_from_json(frame::io::read_json(path), path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw frame::Error("cannot create output directory " + dir + ": " + ec.message());
}

int cmd_merge(const std::vector<std::string>& files, const MergeFlags& flags) {
  const frame::MergeOptions options = merge_options(flags);
  const frame::RobotRun own = frame::io::read_run({files[0], files[1], files[2]});
  const frame::RobotRun incoming = frame::io::read_run({files[3], files[4], files[5]});
  const auto gts = load_ground_truths(flags.gt);
  std::optional<frame::Transform> gt;
  if (!gts.empty()) gt = gts.front();

  const frame::MergeResult result = frame::merge_pair(own, incoming, options, gt);
  ensure_dir(flags.out);
  const fs::path out(flags.out);
  frame::io::write_pcd(out / "merged.pcd", result.merged);

  frame::PointCloud initial = own.map;
  initial.append(frame::apply(result.report.initial_transform, incoming.map));
  frame::io::write_pcd(out / "initial_alignment.pcd", initial);

  json report = frame::io::report_to_json(result.report);
  report["config"] = frame::io::options_to_json(options);
  report["inputs"] = files;
  frame::io::write_file(out / "report.json", frame::io::dump_json(report));

  const auto& r = result.report;
  std::printf("match own k=%u incoming k=%u, yaw %.3f deg, %d GICP iterations, %.3f s\n",
              r.match.own_timestep, r.match.incoming_timestep, frame::rad2deg(r.yaw), r.iterations,
              r.timings.total);
  if (r.t_e) std::printf("T_e %.4f m, R_e %.4f deg\n", *r.t_e, *r.r_e);
  return kExitOk;
}

int cmd_merge_recursive(const std::vector<std::string>& prefixes, const MergeFlags& flags) {
  const frame::MergeOptions options = merge_options(flags);
  std::vector<frame::RobotRun> runs;
  for (const auto& p : prefixes) runs.push_back(frame::io::read_run(frame::io::run_files(p)));
  std::vector<std::optional<frame::Transform>> gts;
  for (const auto& t : load_ground_truths(flags.gt)) gts.emplace_back(t);

  const frame::RecursiveMergeResult result = frame::merge_recursive(runs, options, gts);
  ensure_dir(flags.out);
  const fs::path out(flags.out);
  frame::io::write_pcd(out / "merged.pcd", result.merged);
  json report;
  report["config"] = frame::io::options_to_json(options);
  report["inputs"] = prefixes;
  report["reports"] = json::array();
  for (const auto& r : result.reports) report["reports"].push_back(frame::io::report_to_json(r));
  if (result.failure) {
    report["failure"] = {{"stage", result.failure->stage()}, {"message", result.failure->detail()}};
  }
  frame::io::write_file(out / "report.json", frame::io::dump_json(report));
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const auto& r = result.reports[i];
    std::printf("fold %zu: %.3f s", i + 1, r.timings.total);
    if (r.t_e) std::printf(", T_e %.4f m, R_e %.4f deg", *r.t_e, *r.r_e);
    std::printf("\n");
  }
  if (result.failure) throw *result.failure;
  return kExitOk;
}

struct SimulateFlags {
  std::string scenario;
  std::string scenario_file;
  std::string world;
  std::vector<std::string> runs;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

int cmd_simulate(const SimulateFlags& f) {
  frame::sim::ScenarioSpec spec;
  const int sources = !f.scenario.empty() + !f.scenario_file.empty() + !f.world.empty();
  if (sources != 1) {
    throw frame::io::ParseError("simulate", std::nullopt,
                                "give exactly one of --scenario, --scenario-file or --world");
  }
  if (!f.scenario.empty()) {
    try {
      spec = frame::sim::scenario_by_name(f.scenario, f.seed.value_or(0));
    } catch (const frame::Error& e) {
      throw frame::io::ParseError("--scenario", std::nullopt, e.what());
    }
  } else {
    if (!f.scenario_file.empty()) {
      spec = frame::io::scenario_from_json(frame::io::read_json(f.scenario_file), f.scenario_file);
    } else {
      if (f.runs.empty()) throw frame::io::ParseError("simulate", std::nullopt, "--world needs at least one --run");
      spec.name = fs::path(f.world).stem().string();
      spec.world = frame::io::world_from_json(frame::io::read_json(f.world), f.world);
      for (const auto& r : f.runs) spec.runs.push_back(frame::io::run_spec_from_json(frame::io::read_json(r), r));
    }
    if (f.seed) {
      spec.world.seed = *f.seed;
      for (std::size_t i = 0; i < spec.runs.size(); ++i) spec.runs[i].scan.seed = *f.seed * 16 + i + 1;
    }
  }

  frame::sim::Scenario scenario = [&] {
    try {
      return frame::sim::simulate_scenario(spec);
    } catch (const frame::Error& e) {
      throw frame::io::ParseError(spec.name, std::nullopt, e.what());
    }
  }();
  ensure_dir(f.out);
  const fs::path out(f.out);
  for (std::size_t i = 0; i < scenario.runs.size(); ++i) {
    frame::io::write_run(out / spec.runs[i].name, scenario.runs[i].run);
  }
  frame::io::write_file(out / "world.stl", frame::io::encode_stl(scenario.world.mesh()));
  frame::io::write_file(out / "scenario.json", frame::io::dump_json(frame::io::scenario_to_json(spec)));
  frame::io::write_file(out / "ground_truth.json",
                        frame::io::dump_json(frame::io::ground_truth_sidecar(spec, scenario)));
  for (std::size_t i = 0; i < scenario.runs.size(); ++i) {
    const auto& r = scenario.runs[i].run;
    std::printf("%s: %zu points, %zu poses, %zu records, %.1f m\n", spec.runs[i].name.c_str(), r.map.size(),
                r.trajectory.size(), r.records.size(), r.trajectory.length());
  }
  return kExitOk;
}

struct DescriptorFlags {
  std::string input;
  double vfov = 30.0;
  double max_range = 10.0;
  std::string pgm;
};

int cmd_descriptors(const DescriptorFlags& f) {
  if (fs::path(f.input).extension() == ".frds") {
    const auto records = frame::io::read_frds(f.input);
    std::printf("k,x,y,z,q_norm,w_mean\n");
    for (const auto& r : records) {
      double mean = 0.0;
      for (double v : r.w.values) mean += v;
      std::printf("%u,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.timestep, r.position.x(), r.position.y(), r.position.z(),
                  r.q.norm(), mean / frame::kDescriptorSize);
    }
    return kExitOk;
  }
  const frame::PointCloud scan = frame::io::read_pcd(f.input);
  frame::DepthImage image;
  try {
    image = frame::spherical_project(scan, frame::descriptor_projection(f.vfov, f.max_range));
  } catch (const frame::Error& e) {
    throw frame::io::ParseError(f.input, std::nullopt, e.what());
  }
  const auto [q, w] = frame::extract_descriptors(image);
  if (!f.pgm.empty()) frame::io::write_file(f.pgm, frame::io::encode_pgm(image));
  json out;
  out["q"] = q.values;
  out["w"] = w.values;
  std::cout << frame::io::dump_json(out);
  return kExitOk;
}

struct EvalFlags {
  std::string report;
  std::string gt;
  std::string csv;
};

std::string cell(const std::optional<double>& v, int precision) {
  if (!v) return "-";
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(precision);
  ss << *v;
  return ss.str();
}

int cmd_eval(const EvalFlags& f) {
  auto summaries = frame::io::summaries_from_json(frame::io::read_json(f.report), f.report);
  if (!f.gt.empty()) {
    const auto gts = load_ground_truths(f.gt);
    if (gts.size() < summaries.size()) {
      throw frame::io::ParseError(f.gt, std::nullopt,
                                  "has " + std::to_string(gts.size()) + " ground truth transforms for " +
                                      std::to_string(summaries.size()) + " merges");
    }
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      const auto err = frame::transform_error(gts[i], summaries[i].transform);
      summaries[i].t_e = err.translation_error;
      summaries[i].r_e = err.rotation_error;
    }
  }

  std::printf("%-8s %10s %10s %9s %9s %12s %9s %10s %9s\n", "MERGE", "M_1", "M_2", "Tr_1 (m)", "Tr_2 (m)",
              "OVERLAP (%)", "T_e (m)", "R_e (deg)", "TIME (s)");
  std::ostringstream csv;
  csv << "merge,m1_points,m2_points,tr1_m,tr2_m,overlap_percent,t_e_m,r_e_deg,time_s\n";
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i];
    std::printf("%-8zu %10zu %10zu %9.1f %9.1f %12s %9s %10s %9.3f\n", i + 1, s.points_m1, s.points_m2,
                s.trajectory_length_m1, s.trajectory_length_m2, cell(s.overlap_percent, 1).c_str(),
                cell(s.t_e, 3).c_str(), cell(s.r_e, 3).c_str(), s.total_time);
    csv << i + 1 << ',' << s.points_m1 << ',' << s.points_m2 << ',' << cell(s.trajectory_length_m1, 3) << ','
        << cell(s.trajectory_length_m2, 3) << ',' << (s.overlap_percent ? cell(s.overlap_percent, 3) : "")
        << ',' << (s.t_e ? cell(s.t_e, 6) : "") << ',' << (s.r_e ? cell(s.r_e, 6) : "") << ','
        << cell(s.total_time, 6) << '\n';
  }
  if (f.csv.empty()) {
    std::printf("\n%s", csv.str().c_str());
  } else {
    frame::io::write_file(f.csv, csv.str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  frame::configure_threads_from_env();

  CLI::App app{"Egocentric 3D map merging for multi-robot runs"};
  app.require_subcommand(1);

  MergeFlags merge_flags;
  std::vector<std::string> merge_files;
  auto* merge = app.add_subcommand("merge", "Merge an incoming run into the own run");
  merge->add_option("files", merge_files, "map_a traj_a desc_a map_b traj_b desc_b (a is own)")
      ->required()
      ->expected(6);
  add_merge_flags(merge, merge_flags);

  MergeFlags recursive_flags;
  std::vector<std::string> prefixes;
  auto* recursive = app.add_subcommand("merge-recursive", "Fold several runs into the first one");
  recursive->add_option("runs", prefixes, "Run prefixes P (reads P.pcd, P_trajectory.csv, P.frds)")
      ->required()
      ->expected(2, 1 << 20);
  add_merge_flags(recursive, recursive_flags);

  SimulateFlags sim_flags;
  std::uint64_t seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Simulate runs in a procedural tunnel world");
  simulate->add_option("--scenario", sim_flags.scenario, "Built-in scenario: fig3, fig4 or disjoint");
  simulate->add_option("--scenario-file", sim_flags.scenario_file, "Scenario JSON");
  simulate->add_option("--world", sim_flags.world, "World JSON");
  simulate->add_option("--run", sim_flags.runs, "Run JSON, repeatable");
  auto* seed_opt = simulate->add_option("--seed", seed, "Seed");
  simulate->add_option("--out", sim_flags.out, "Output directory")->capture_default_str();

  DescriptorFlags desc_flags;
  auto* descriptors = app.add_subcommand("descriptors", "Descriptors of a sensor-frame scan, or list an FRDS file");
  descriptors->add_option("input", desc_flags.input, "Scan PCD or FRDS file")->required();
  descriptors->add_option("--vfov", desc_flags.vfov, "Vertical field of view of the image grid (deg)")
      ->capture_default_str();
  descriptors->add_option("--max-range", desc_flags.max_range, "Range cap of the image (m)")->capture_default_str();
  descriptors->add_option("--pgm", desc_flags.pgm, "Write the depth image as 16-bit PGM");

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Tabulate merge reports");
  eval->add_option("report", eval_flags.report, "report.json from merge or merge-recursive")->required();
  eval->add_option("--gt", eval_flags.gt, "Ground truth sidecar");
  eval->add_option("--csv", eval_flags.csv, "Write the CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*merge) return cmd_merge(merge_files, merge_flags);
    if (*recursive) return cmd_merge_recursive(prefixes, recursive_flags);
    if (*simulate) {
      if (*seed_opt) sim_flags.seed = seed;
      return cmd_simulate(sim_flags);
    }
    if (*descriptors) return cmd_descriptors(desc_flags);
    if (*eval) return cmd_eval(eval_flags);
  } catch (const frame::PipelineError& e) {
    std::fprintf(stderr, "pipeline error in stage %s: %s\n", e.stage().c_str(), e.detail().c_str());
    return kExitPipeline;
  } catch (const frame::io::ParseError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const frame::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}
