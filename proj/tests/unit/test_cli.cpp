#include "doctest.h"

#include "frame/io.hpp"
#include "support.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

using namespace frame;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run_cli(const std::string& args, const fs::path& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(FRAME_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = io::read_file(out);
  o.err = io::read_file(err);
  return o;
}

std::string run_args(const fs::path& prefix) {
  const auto f = io::run_files(prefix);
  return f.map.string() + " " + f.trajectory.string() + " " + f.descriptors.string();
}

// fig3 seed 1, simulated once for the whole binary.
const fs::path& fig3_dir() {
  static const fs::path dir = [] {
    auto d = frame::testing::scratch_dir("cli_fig3");
    const auto o = run_cli("simulate --scenario fig3 --seed 1 --out " + (d / "sim").string(), d);
    REQUIRE(o.code == 0);
    return d / "sim";
  }();
  return dir;
}

}  // namespace

TEST_CASE("simulate writes runs and a ground truth sidecar") {
  const auto& sim = fig3_dir();
  for (const char* f : {"run_a.pcd", "run_a_trajectory.csv", "run_a.frds", "run_b.pcd", "run_b_trajectory.csv",
                        "run_b.frds", "world.stl", "scenario.json", "ground_truth.json"}) {
    CHECK(fs::exists(sim / f));
  }
  const auto gt = io::read_json(sim / "ground_truth.json");
  CHECK(gt["runs"].size() == 2);
  const auto transforms = io::ground_truths_from_json(gt, "gt");
  REQUIRE(transforms.size() == 1);
  CHECK(std::abs(std::abs(transforms[0].yaw()) - kPi) <= 1e-9);
}

TEST_CASE("bundled scenario specs") {
  const fs::path dir = frame::testing::scratch_dir("cli_bundled");
  const fs::path scenarios(FRAME_SCENARIOS);

  const auto f3 = run_cli("simulate --scenario-file " + (scenarios / "fig3.json").string() + " --out " +
                              (dir / "fig3").string(),
                          dir);
  REQUIRE(f3.code == 0);
  const auto gt3 = io::ground_truths_from_json(io::read_json(dir / "fig3" / "ground_truth.json"), "gt");
  REQUIRE(gt3.size() == 1);
  CHECK(std::abs(std::abs(gt3[0].yaw()) - kPi) <= 1e-9);

  const auto f4 = run_cli("simulate --scenario-file " + (scenarios / "fig4.json").string() + " --out " +
                              (dir / "fig4").string(),
                          dir);
  REQUIRE(f4.code == 0);
  const auto sidecar = io::read_json(dir / "fig4" / "ground_truth.json");
  CHECK(sidecar["runs"].size() == 4);
  const auto gt4 = io::ground_truths_from_json(sidecar, "gt");
  REQUIRE(gt4.size() == 3);
  // Chained: every later run is expressed in the first run's frame.
  for (std::size_t i = 0; i < gt4.size(); ++i) {
    CHECK(sidecar["ground_truth"][i]["own"] == "run_1");
    CHECK(sidecar["ground_truth"][i]["incoming"] == "run_" + std::to_string(i + 2));
  }
}

TEST_CASE("simulate is byte-for-byte reproducible") {
  const fs::path dir = frame::testing::scratch_dir("cli_repro");
  const auto a = run_cli("simulate --scenario fig3 --seed 1 --out " + (dir / "a").string(), dir);
  REQUIRE(a.code == 0);
  for (const auto& entry : fs::directory_iterator(fig3_dir())) {
    const auto name = entry.path().filename();
    CHECK_MESSAGE(io::read_file(entry.path()) == io::read_file(dir / "a" / name), name.string());
  }
}

TEST_CASE("self merge exits 0 with an identity transform") {
  const fs::path dir = frame::testing::scratch_dir("cli_self");
  const auto a = run_args(fig3_dir() / "run_a");
  const auto o = run_cli("merge " + a + " " + a + " --out " + dir.string(), dir);
  REQUIRE(o.code == 0);
  const auto report = io::read_json(dir / "report.json");
  const auto t = io::transform_from_json(report["transform"], "report");
  const auto e = transform_error(Transform::identity(), t);
  CHECK(e.translation_error <= 1e-6);
  CHECK(deg2rad(e.rotation_error) <= 1e-5);
  CHECK(fs::exists(dir / "merged.pcd"));
  CHECK(fs::exists(dir / "initial_alignment.pcd"));
  CHECK(report.contains("config"));
}

TEST_CASE("merge and eval on the fig3 pair") {
  const fs::path dir = frame::testing::scratch_dir("cli_pair");
  const auto o = run_cli("merge " + run_args(fig3_dir() / "run_a") + " " + run_args(fig3_dir() / "run_b") +
                             " --gt " + (fig3_dir() / "ground_truth.json").string() + " --out " + dir.string(),
                         dir);
  REQUIRE(o.code == 0);
  const auto report = io::read_json(dir / "report.json");
  CHECK(report["t_e"].get<double>() <= 0.2);
  CHECK(report["r_e"].get<double>() <= 3.5);
  CHECK(report["timings"]["total"].get<double>() < 3.0);

  const auto ev = run_cli("eval " + (dir / "report.json").string(), dir);
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("T_e (m)") != std::string::npos);
  CHECK(ev.out.find("OVERLAP (%)") != std::string::npos);
  const auto csv_at = ev.out.find("merge,m1_points");
  REQUIRE(csv_at != std::string::npos);
  const auto row = ev.out.substr(ev.out.find('\n', csv_at) + 1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (std::size_t p = 0; p <= row.size(); ++p) {
    if (p == row.size() || row[p] == ',' || row[p] == '\n') {
      cells.push_back(row.substr(start, p - start));
      start = p + 1;
      if (p < row.size() && row[p] == '\n') break;
    }
  }
  REQUIRE(cells.size() == 9);
  for (const auto& c : cells) CHECK_FALSE(c.empty());
  CHECK(std::stod(cells[6]) <= 0.2);
}

TEST_CASE("eval with identity ground truth") {
  const fs::path dir = frame::testing::scratch_dir("cli_eval_identity");
  MergeReport r;
  r.points_m1 = 5;
  r.points_m2 = 6;
  io::write_file(dir / "report.json", io::dump_json(io::report_to_json(r)));
  nlohmann::json gt;
  gt["transform"] = io::transform_to_json(Transform::identity());
  io::write_file(dir / "gt.json", io::dump_json(gt));
  const auto o = run_cli("eval " + (dir / "report.json").string() + " --gt " + (dir / "gt.json").string() +
                             " --csv " + (dir / "table.csv").string(),
                         dir);
  REQUIRE(o.code == 0);
  const auto csv = io::read_file(dir / "table.csv");
  CHECK(csv.find(",0.000000,0.000000,") != std::string::npos);
}

TEST_CASE("error contract") {
  const fs::path dir = frame::testing::scratch_dir("cli_errors");
  const auto a = run_args(fig3_dir() / "run_a");

  const auto missing = (dir / "nowhere.frds").string();
  const auto f = io::run_files(fig3_dir() / "run_b");
  const auto o = run_cli("merge " + a + " " + f.map.string() + " " + f.trajectory.string() + " " + missing +
                             " --out " + dir.string(),
                         dir);
  CHECK(o.code == 1);
  CHECK(o.err.find(missing) != std::string::npos);

  io::write_file(dir / "bad.json", "{\"transform\": [1, 2,");
  const auto bad = run_cli("eval " + (dir / "bad.json").string(), dir);
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bad.json") != std::string::npos);
  CHECK(bad.err.find("byte") != std::string::npos);

  auto spec = io::scenario_to_json(sim::fig3_scenario(0));
  spec["world"]["nodes"].push_back({500.0, 500.0, 0.0});
  io::write_file(dir / "disconnected.json", io::dump_json(spec));
  const auto invalid = run_cli("simulate --scenario-file " + (dir / "disconnected.json").string() + " --out " +
                                   (dir / "x").string(),
                               dir);
  CHECK(invalid.code == 1);

  const auto usage = run_cli("merge " + a, dir);
  CHECK(usage.code == 1);
}

TEST_CASE("disjoint runs exit 2 with the failing stage") {
  const fs::path dir = frame::testing::scratch_dir("cli_disjoint");
  REQUIRE(run_cli("simulate --scenario disjoint --seed 1 --out " + (dir / "sim").string(), dir).code == 0);
  const auto o = run_cli("merge " + run_args(fig3_dir() / "run_a") + " " + run_args(dir / "sim" / "run_disjoint") +
                             " --out " + (dir / "merge").string(),
                         dir);
  CHECK(o.code == 2);
  CHECK(o.err.find("pipeline error in stage") != std::string::npos);
}

TEST_CASE("descriptors command") {
  const fs::path dir = frame::testing::scratch_dir("cli_desc");
  const auto list = run_cli("descriptors " + (fig3_dir() / "run_a.frds").string(), dir);
  REQUIRE(list.code == 0);
  CHECK(list.out.rfind("k,x,y,z,q_norm,w_mean\n", 0) == 0);

  io::write_pcd(dir / "scan.pcd", PointCloud({Point3(1, 0, 0), Point3(0, 2, 0.1)}));
  const auto one = run_cli("descriptors " + (dir / "scan.pcd").string() + " --pgm " + (dir / "img.pgm").string(), dir);
  REQUIRE(one.code == 0);
  const auto j = io::parse_json(one.out, "stdout");
  CHECK(j["q"].size() == 64);
  CHECK(j["w"].size() == 64);
  CHECK(fs::exists(dir / "img.pgm"));
}
