#include "doctest.h"

#include "frame/io.hpp"
#include "support.hpp"

#include <cstring>
#include <random>

using namespace frame;
using namespace frame::io;

namespace {

std::optional<std::size_t> error_offset(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.offset();
  }
  FAIL("no parse error");
  return std::nullopt;
}

Trajectory sample_trajectory() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  Trajectory t;
  for (int k = 0; k < 50; ++k) t.poses.push_back({k * 2 + 1, {u(rng), u(rng), u(rng) * 1e-3}, u(rng) / 400.0});
  return t;
}

std::vector<DescriptorRecord> sample_records() {
  std::mt19937_64 rng(4);
  std::vector<DescriptorRecord> out;
  for (std::uint32_t k = 0; k < 30; ++k) out.push_back(frame::testing::random_record(rng, 3 * k));
  return out;
}

}  // namespace

TEST_CASE("PCD round trip in both encodings") {
  std::mt19937_64 rng(1);
  const auto cloud = frame::testing::random_cloud(rng, 1000, 150.0);
  for (auto enc : {PcdEncoding::ascii, PcdEncoding::binary}) {
    const auto back = decode_pcd(encode_pcd(cloud, enc), "mem");
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int a = 0; a < 3; ++a) CHECK(back[i](a) == static_cast<double>(static_cast<float>(cloud[i](a))));
    }
  }
}

TEST_CASE("PCD with extra fields, F8 coordinates and NaN rows") {
  const std::string ascii =
      "# comment\nVERSION .7\nFIELDS intensity x y z\nSIZE 4 8 8 8\nTYPE F F F F\nCOUNT 1 1 1 1\n"
      "WIDTH 3\nHEIGHT 1\nPOINTS 3\nDATA ascii\n"
      "5 1.25 2.5 3.75\n6 nan nan nan\n7 0.1000000000000000055511 -2 4\n";
  const auto c = decode_pcd(ascii, "mem");
  REQUIRE(c.size() == 2);
  CHECK(c[0] == Point3(1.25, 2.5, 3.75));
  CHECK(c[1] == Point3(0.1, -2, 4));

  std::string bin = "FIELDS x y z rgb\nSIZE 8 8 8 4\nTYPE F F F U\nCOUNT 1 1 1 1\nWIDTH 1\nHEIGHT 1\nDATA binary\n";
  const double xyz[3] = {0.1, -7.5, 1e5};
  bin.append(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  bin.append(4, '\0');
  const auto b = decode_pcd(bin, "mem");
  REQUIRE(b.size() == 1);
  CHECK(b[0] == Point3(0.1, -7.5, 1e5));
}

TEST_CASE("PCD errors report byte offsets") {
  const std::string header = "FIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\nWIDTH 2\nHEIGHT 1\nPOINTS 2\n";
  const std::string good_ascii = header + "DATA ascii\n1 2 3\n4 5 6\n";
  CHECK(decode_pcd(good_ascii, "mem").size() == 2);

  const std::string bad_value = header + "DATA ascii\n1 2 3\n4 x 6\n";
  CHECK(error_offset([&] { decode_pcd(bad_value, "mem"); }) == bad_value.find("4 x 6") + 2);

  const std::string short_bin = header + "DATA binary\n" + std::string(13, '\0');
  CHECK(error_offset([&] { decode_pcd(short_bin, "mem"); }) == short_bin.size());

  const std::string bad_key = "FIELDS x y z\nBOGUS 1\n";
  CHECK(error_offset([&] { decode_pcd(bad_key, "mem"); }) == 13);

  const std::string compressed = header + "DATA binary_compressed\n";
  CHECK(error_offset([&] { decode_pcd(compressed, "mem"); }) == header.size() + 5);

  const std::string inf = header + "DATA ascii\n1 2 3\ninf 5 6\n";
  CHECK(error_offset([&] { decode_pcd(inf, "mem"); }).has_value());

  CHECK_THROWS_AS(decode_pcd("FIELDS x y\nSIZE 4 4\nTYPE F F\nCOUNT 1 1\nWIDTH 0\nDATA ascii\n", "mem"),
                  ParseError);
}

TEST_CASE("parse error message names source and offset") {
  const ParseError e("maps/a.pcd", 42, "bad thing");
  CHECK(std::string(e.what()) == "maps/a.pcd: byte 42: bad thing");
  const ParseError n("maps/a.pcd", std::nullopt, "cannot open file");
  CHECK(std::string(n.what()) == "maps/a.pcd: cannot open file");
}

TEST_CASE("trajectory CSV round trip") {
  const auto t = sample_trajectory();
  const auto text = encode_trajectory(t);
  CHECK(text.rfind("k,x,y,z,yaw\n", 0) == 0);
  const auto back = decode_trajectory(text, "mem");
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back.poses[i].timestep == t.poses[i].timestep);
    CHECK((back.poses[i].position - t.poses[i].position).norm() <= 1e-9);
    CHECK(std::abs(back.poses[i].yaw - t.poses[i].yaw) <= 1e-9);
  }
}

TEST_CASE("trajectory CSV errors") {
  CHECK(error_offset([] { decode_trajectory("k,x,y,z\n", "mem"); }) == 0);
  const std::string bad = "k,x,y,z,yaw\n0,1,2,3,0\n1,1,zz,3,0\n";
  CHECK(error_offset([&] { decode_trajectory(bad, "mem"); }) == bad.find("zz"));
  const std::string cols = "k,x,y,z,yaw\n0,1,2,3\n";
  CHECK(error_offset([&] { decode_trajectory(cols, "mem"); }) == 12);
  CHECK_THROWS_AS(decode_trajectory("k,x,y,z,yaw\n3,0,0,0,0\n2,0,0,0,0\n", "mem"), ParseError);
}

TEST_CASE("FRDS round trip") {
  const auto recs = sample_records();
  const auto bytes = encode_frds(recs);
  CHECK(bytes.size() == 10 + recs.size() * 540);
  CHECK(bytes.compare(0, 4, "FRDS") == 0);
  const auto back = decode_frds(bytes, "mem");
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].timestep == recs[i].timestep);
    CHECK(back[i].position == recs[i].position);
    for (int j = 0; j < kDescriptorSize; ++j) {
      CHECK(back[i].q.values[j] == static_cast<double>(static_cast<float>(recs[i].q.values[j])));
      CHECK(back[i].w.values[j] == static_cast<double>(static_cast<float>(recs[i].w.values[j])));
    }
  }
}

TEST_CASE("FRDS errors") {
  const auto bytes = encode_frds(sample_records());
  CHECK(error_offset([&] { decode_frds("NOPE" + bytes.substr(4), "mem"); }) == 0);
  CHECK(error_offset([&] { decode_frds(bytes.substr(0, bytes.size() - 3), "mem"); }) == bytes.size() - 3);
  auto version = bytes;
  version[4] = 9;
  CHECK(error_offset([&] { decode_frds(version, "mem"); }) == 4);
  auto negative = bytes;
  const float minus = -1.0f;
  const std::size_t w0 = 10 + 540 + 4 + 24 + 256;
  std::memcpy(negative.data() + w0, &minus, 4);
  CHECK(error_offset([&] { decode_frds(negative, "mem"); }) == 550);
}

TEST_CASE("PGM and STL encodings") {
  DepthImage img(ProjectionParams{16, 256, 20.0, 50.0});
  img.at(0, 1) = 1.2345;
  const auto pgm = encode_pgm(img);
  const std::string header = "P5\n256 16\n65535\n";
  REQUIRE(pgm.size() == header.size() + 16 * 256 * 2);
  CHECK(pgm.compare(0, header.size(), header) == 0);
  const auto hi = static_cast<unsigned char>(pgm[header.size() + 2]);
  const auto lo = static_cast<unsigned char>(pgm[header.size() + 3]);
  CHECK(hi * 256 + lo == 1235);

  sim::TriangleMesh mesh;
  mesh.vertices = {Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0)};
  mesh.triangles = {{0, 1, 2}, {0, 2, 1}};
  const auto stl = encode_stl(mesh);
  CHECK(stl.size() == 84 + 2 * 50);
  std::uint32_t n = 0;
  std::memcpy(&n, stl.data() + 80, 4);
  CHECK(n == 2);
  float nz = 0;
  std::memcpy(&nz, stl.data() + 84 + 8, 4);
  CHECK(nz == 1.0f);
}

TEST_CASE("transform JSON round trip and validation") {
  std::mt19937_64 rng(5);
  const auto t = frame::testing::random_transform(rng, 100.0, 3.0);
  const auto back = transform_from_json(transform_to_json(t), "mem");
  CHECK(back.matrix() == t.matrix());
  CHECK_THROWS_AS(transform_from_json(nlohmann::json::array({1, 2, 3}), "mem"), ParseError);
  auto skew = transform_to_json(Transform::identity());
  skew[0] = 2.0;
  CHECK_THROWS_AS(transform_from_json(skew, "mem"), ParseError);
}

TEST_CASE("scenario JSON round trip") {
  for (const std::string name : {"fig3", "fig4", "disjoint"}) {
    const auto spec = sim::scenario_by_name(name, 11);
    const auto j = scenario_to_json(spec);
    const auto back = scenario_from_json(parse_json(dump_json(j), "mem"), "mem");
    CHECK(dump_json(scenario_to_json(back)) == dump_json(j));
    CHECK(sim::generate_world(back.world).id() == sim::generate_world(spec.world).id());
    REQUIRE(back.runs.size() == spec.runs.size());
    CHECK(back.runs[0].local_frame.matrix() == spec.runs[0].local_frame.matrix());
  }
}

TEST_CASE("schema errors point at the field") {
  auto j = scenario_to_json(sim::fig3_scenario(0));
  j["runs"][1]["scan"]["vertical_fov"] = "wide";
  try {
    (void)scenario_from_json(j, "s.json");
    FAIL("accepted a bad field");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("/runs/1/scan/vertical_fov") != std::string::npos);
  }
}

TEST_CASE("malformed JSON reports the byte") {
  const auto off = error_offset([] { parse_json("{\"a\": [1, 2,, 3]}", "mem"); });
  REQUIRE(off.has_value());
  CHECK(*off >= 12);
  CHECK(*off <= 14);
}

TEST_CASE("dump_json sorts keys and ends with a newline") {
  nlohmann::json j;
  j["b"] = 1;
  j["a"] = 2;
  const auto s = dump_json(j);
  CHECK(s.find("\"a\"") < s.find("\"b\""));
  CHECK(s.back() == '\n');
}

TEST_CASE("report JSON carries optional fields only with ground truth") {
  MergeReport r;
  r.transform = Transform::from_yaw_translation(0.5, {1, 2, 3});
  r.points_m1 = 10;
  r.points_m2 = 20;
  r.timings.total = 0.25;
  auto j = report_to_json(r);
  CHECK_FALSE(j.contains("t_e"));
  auto s = summaries_from_json(j, "mem");
  REQUIRE(s.size() == 1);
  CHECK(s[0].transform.matrix() == r.transform.matrix());
  CHECK(s[0].points_m2 == 20);
  CHECK_FALSE(s[0].t_e.has_value());

  r.t_e = 0.01;
  r.r_e = 0.2;
  r.overlap_percent = 40.0;
  j = report_to_json(r);
  CHECK(j["t_e"] == 0.01);
  nlohmann::json wrapped;
  wrapped["reports"] = nlohmann::json::array({j, j});
  s = summaries_from_json(wrapped, "mem");
  REQUIRE(s.size() == 2);
  CHECK(*s[1].r_e == 0.2);
  CHECK(s[1].total_time == 0.25);
}

TEST_CASE("ground truth sidecar") {
  const auto spec = sim::fig3_scenario(0);
  const auto& sc = frame::testing::cached_scenario("fig3", 0);
  const auto j = ground_truth_sidecar(spec, sc);
  const auto gts = ground_truths_from_json(j, "mem");
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].matrix() == sim::ground_truth_transform(sc.runs[0], sc.runs[1]).matrix());
  nlohmann::json bare;
  bare["transform"] = transform_to_json(Transform::identity());
  CHECK(ground_truths_from_json(bare, "mem").size() == 1);
}

TEST_CASE("run files round trip") {
  const auto dir = frame::testing::scratch_dir("io_run");
  const auto& run = frame::testing::cached_scenario("fig3", 0).runs[1].run;
  write_run(dir / "b", run);
  const auto files = run_files(dir / "b");
  CHECK(files.map.filename() == "b.pcd");
  CHECK(files.trajectory.filename() == "b_trajectory.csv");
  CHECK(files.descriptors.filename() == "b.frds");
  const auto back = read_run(files);
  CHECK(back.map.size() == run.map.size());
  CHECK(back.trajectory.size() == run.trajectory.size());
  CHECK(back.records.size() == run.records.size());
  CHECK_THROWS_AS(read_run(run_files(dir / "missing")), ParseError);
}
