#include "frame/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace frame::io {

namespace {

std::string describe(const std::string& source, std::optional<std::size_t> offset,
                     const std::string& message) {
  std::string out = source;
  if (offset) out += ": byte " + std::to_string(*offset);
  return out + ": " + message;
}

// Little-endian byte writer and bounds-checked reader.
class Writer {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const std::string& s) { out_ += s; }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t offset, const std::string& source)
      : bytes_(bytes), pos_(offset), source_(source) {}

  std::size_t position() const { return pos_; }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(get(4))); }
  double f64() { return std::bit_cast<double>(get(8)); }

 private:
  std::uint64_t get(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > bytes_.size()) {
      throw ParseError(source_, pos_, "unexpected end of data");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  const std::string& bytes_;
  std::size_t pos_;
  const std::string& source_;
};

std::string format_double(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

struct Token {
  std::string_view text;
  std::size_t offset = 0;
};

std::vector<Token> split(std::string_view line, std::size_t line_offset, char sep) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i <= line.size()) {
    if (sep == ' ') {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
    }
    std::size_t j = i;
    while (j < line.size() && (sep == ' ' ? (line[j] != ' ' && line[j] != '\t') : line[j] != sep)) ++j;
    out.push_back({line.substr(i, j - i), line_offset + i});
    i = j + 1;
  }
  return out;
}

/// Splits into lines, keeping the byte offset of each and dropping '\r'.
struct Line {
  std::string_view text;
  std::size_t offset = 0;
};

Line next_line(const std::string& bytes, std::size_t& pos) {
  const std::size_t start = pos;
  std::size_t end = bytes.find('\n', pos);
  if (end == std::string::npos) end = bytes.size();
  pos = end < bytes.size() ? end + 1 : end;
  std::string_view text(bytes.data() + start, end - start);
  if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
  return {text, start};
}

struct PcdField {
  std::string name;
  int size = 4;
  char type = 'F';
  int count = 1;
};

double read_scalar(const char* p, const PcdField& f) {
  if (f.size == 4) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return std::bit_cast<float>(v);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

ParseError::ParseError(std::string source, std::optional<std::size_t> offset, const std::string& message)
    : Error(describe(source, offset, message)), source_(std::move(source)), offset_(offset) {}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), std::nullopt, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

std::string encode_pcd(const PointCloud& cloud, PcdEncoding encoding) {
  std::string out;
  out += "# .PCD v0.7 - Point Cloud Data file format\n";
  out += "VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n";
  out += "WIDTH " + std::to_string(cloud.size()) + "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n";
  out += "POINTS " + std::to_string(cloud.size()) + "\n";
  if (encoding == PcdEncoding::ascii) {
    out += "DATA ascii\n";
    for (const auto& p : cloud.points) {
      out += format_double(static_cast<float>(p.x()), 9) + ' ' + format_double(static_cast<float>(p.y()), 9) +
             ' ' + format_double(static_cast<float>(p.z()), 9) + '\n';
    }
    return out;
  }
  out += "DATA binary\n";
  Writer w;
  for (const auto& p : cloud.points) {
    w.f32(static_cast<float>(p.x()));
    w.f32(static_cast<float>(p.y()));
    w.f32(static_cast<float>(p.z()));
  }
  return out + w.take();
}

PointCloud decode_pcd(const std::string& bytes, const std::string& source) {
  std::vector<PcdField> fields;
  std::size_t width = 0;
  std::size_t height = 1;
  std::optional<std::size_t> points;
  std::string data;
  std::size_t pos = 0;
  std::size_t data_offset = 0;

  const auto fail = [&](std::size_t at, const std::string& msg) -> ParseError { return {source, at, msg}; };
  const auto parse_size = [&](const Token& t) {
    std::size_t v = 0;
    if (!parse_number(t.text, v)) throw fail(t.offset, "expected a non-negative integer");
    return v;
  };

  while (data.empty()) {
    if (pos >= bytes.size()) throw fail(pos, "missing DATA line");
    const Line line = next_line(bytes, pos);
    if (line.text.empty() || line.text.front() == '#') continue;
    const auto tokens = split(line.text, line.offset, ' ');
    if (tokens.empty()) continue;
    const std::string key(tokens[0].text);
    const std::vector<Token> args(tokens.begin() + 1, tokens.end());
    if (key == "VERSION" || key == "VIEWPOINT") {
      continue;
    } else if (key == "FIELDS") {
      fields.clear();
      for (const auto& a : args) fields.push_back({std::string(a.text)});
    } else if (key == "SIZE" || key == "TYPE" || key == "COUNT") {
      if (args.size() != fields.size()) throw fail(line.offset, key + " does not match FIELDS");
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (key == "TYPE") {
          if (args[i].text.size() != 1) throw fail(args[i].offset, "bad TYPE");
          fields[i].type = args[i].text[0];
        } else {
          const auto v = static_cast<int>(parse_size(args[i]));
          (key == "SIZE" ? fields[i].size : fields[i].count) = v;
        }
      }
    } else if (key == "WIDTH" || key == "HEIGHT" || key == "POINTS") {
      if (args.size() != 1) throw fail(line.offset, key + " takes one value");
      const std::size_t v = parse_size(args[0]);
      if (key == "WIDTH") width = v;
      else if (key == "HEIGHT") height = v;
      else points = v;
    } else if (key == "DATA") {
      if (args.size() != 1) throw fail(line.offset, "DATA takes one value");
      data = std::string(args[0].text);
      data_offset = pos;
      if (data != "ascii" && data != "binary") {
        throw fail(args[0].offset, "unsupported DATA encoding '" + data + "'");
      }
    } else {
      throw fail(line.offset, "unknown header key '" + key + "'");
    }
  }

  const std::size_t count = points.value_or(width * height);
  if (width * height != count) throw fail(0, "WIDTH * HEIGHT does not match POINTS");
  std::array<int, 3> axis{-1, -1, -1};
  std::size_t step = 0;
  std::size_t values = 0;
  std::vector<std::size_t> byte_offset;
  std::vector<std::size_t> value_offset;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto& f = fields[i];
    if (f.count < 1) throw fail(0, "field " + f.name + " has COUNT < 1");
    byte_offset.push_back(step);
    value_offset.push_back(values);
    step += static_cast<std::size_t>(f.size * f.count);
    values += static_cast<std::size_t>(f.count);
    const int a = f.name == "x" ? 0 : f.name == "y" ? 1 : f.name == "z" ? 2 : -1;
    if (a < 0) continue;
    if (f.type != 'F' || (f.size != 4 && f.size != 8) || f.count != 1) {
      throw fail(0, "field " + f.name + " must be a single F4 or F8 value");
    }
    axis[static_cast<std::size_t>(a)] = static_cast<int>(i);
  }
  if (axis[0] < 0 || axis[1] < 0 || axis[2] < 0) throw fail(0, "FIELDS must include x y z");

  PointCloud cloud;
  cloud.points.reserve(count);
  const auto keep = [&](const Point3& p, std::size_t at) {
    if (std::isnan(p.x()) || std::isnan(p.y()) || std::isnan(p.z())) return;
    if (!is_finite(p)) throw fail(at, "non-finite coordinate");
    cloud.points.push_back(p);
  };

  if (data == "binary") {
    if (bytes.size() - data_offset < count * step) throw fail(bytes.size(), "binary data is truncated");
    for (std::size_t n = 0; n < count; ++n) {
      const std::size_t base = data_offset + n * step;
      Point3 p;
      for (int a = 0; a < 3; ++a) {
        const auto fi = static_cast<std::size_t>(axis[static_cast<std::size_t>(a)]);
        p(a) = read_scalar(bytes.data() + base + byte_offset[fi], fields[fi]);
      }
      keep(p, base);
    }
    return cloud;
  }

  for (std::size_t n = 0; n < count; ++n) {
    if (pos >= bytes.size()) throw fail(pos, "expected " + std::to_string(count) + " points");
    const Line line = next_line(bytes, pos);
    const auto tokens = split(line.text, line.offset, ' ');
    if (tokens.size() != values) {
      throw fail(line.offset, "expected " + std::to_string(values) + " values per point");
    }
    Point3 p;
    for (int a = 0; a < 3; ++a) {
      const auto fi = static_cast<std::size_t>(axis[static_cast<std::size_t>(a)]);
      const Token& t = tokens[value_offset[fi]];
      double v = 0.0;
      if (t.text == "nan" || t.text == "NaN") {
        v = std::nan("");
      } else if (!parse_number(t.text, v)) {
        throw fail(t.offset, "expected a number");
      }
      p(a) = fields[fi].size == 4 ? static_cast<double>(static_cast<float>(v)) : v;
    }
    keep(p, line.offset);
  }
  return cloud;
}

void write_pcd(const std::filesystem::path& path, const PointCloud& cloud, PcdEncoding encoding) {
  write_file(path, encode_pcd(cloud, encoding));
}

PointCloud read_pcd(const std::filesystem::path& path) {
  return decode_pcd(read_file(path), path.string());
}

std::string encode_trajectory(const Trajectory& trajectory) {
  std::string out = "k,x,y,z,yaw\n";
  for (const auto& p : trajectory.poses) {
    out += std::to_string(p.timestep) + ',' + format_double(p.position.x(), 17) + ',' +
           format_double(p.position.y(), 17) + ',' + format_double(p.position.z(), 17) + ',' +
           format_double(p.yaw, 17) + '\n';
  }
  return out;
}

Trajectory decode_trajectory(const std::string& bytes, const std::string& source) {
  std::size_t pos = 0;
  const Line header = next_line(bytes, pos);
  if (header.text != "k,x,y,z,yaw") throw ParseError(source, 0, "expected header 'k,x,y,z,yaw'");
  Trajectory t;
  while (pos < bytes.size()) {
    const Line line = next_line(bytes, pos);
    if (line.text.empty()) continue;
    const auto fields = split(line.text, line.offset, ',');
    if (fields.size() != 5) throw ParseError(source, line.offset, "expected 5 columns");
    Pose p;
    if (!parse_number(fields[0].text, p.timestep)) {
      throw ParseError(source, fields[0].offset, "expected an integer timestep");
    }
    std::array<double, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!parse_number(fields[i + 1].text, v[i])) {
        throw ParseError(source, fields[i + 1].offset, "expected a number");
      }
    }
    p.position = Point3(v[0], v[1], v[2]);
    p.yaw = v[3];
    t.poses.push_back(p);
  }
  try {
    t.validate();
  } catch (const Error& e) {
    throw ParseError(source, std::nullopt, e.what());
  }
  return t;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  write_file(path, encode_trajectory(trajectory));
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  return decode_trajectory(read_file(path), path.string());
}

std::string encode_frds(const std::vector<DescriptorRecord>& records) {
  Writer w;
  w.raw("FRDS");
  w.u16(kFrdsVersion);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    w.u32(r.timestep);
    for (int i = 0; i < 3; ++i) w.f64(r.position(i));
    for (double v : r.q.values) w.f32(static_cast<float>(v));
    for (double v : r.w.values) w.f32(static_cast<float>(v));
  }
  return w.take();
}

std::vector<DescriptorRecord> decode_frds(const std::string& bytes, const std::string& source) {
  constexpr std::size_t kHeader = 10;
  constexpr std::size_t kRecord = 4 + 3 * 8 + 2 * kDescriptorSize * 4;
  if (bytes.size() < 4 || bytes.compare(0, 4, "FRDS") != 0) throw ParseError(source, 0, "missing FRDS magic");
  Reader r(bytes, 4, source);
  const std::uint16_t version = r.u16();
  if (version != kFrdsVersion) {
    throw ParseError(source, 4, "unsupported FRDS version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  const std::size_t expected = kHeader + static_cast<std::size_t>(count) * kRecord;
  if (bytes.size() != expected) {
    throw ParseError(source, std::min(bytes.size(), expected),
                     "size does not match record count " + std::to_string(count));
  }
  std::vector<DescriptorRecord> out(count);
  for (auto& rec : out) {
    const std::size_t at = r.position();
    rec.timestep = r.u32();
    for (int i = 0; i < 3; ++i) rec.position(i) = r.f64();
    for (double& v : rec.q.values) v = r.f32();
    for (double& v : rec.w.values) v = r.f32();
    if (!is_finite(rec.position)) throw ParseError(source, at, "non-finite record position");
    for (std::size_t i = 0; i < rec.q.values.size(); ++i) {
      if (!std::isfinite(rec.q.values[i]) || !std::isfinite(rec.w.values[i]) || rec.w.values[i] < 0.0) {
        throw ParseError(source, at, "invalid descriptor values");
      }
    }
  }
  return out;
}

void write_frds(const std::filesystem::path& path, const std::vector<DescriptorRecord>& records) {
  write_file(path, encode_frds(records));
}

std::vector<DescriptorRecord> read_frds(const std::filesystem::path& path) {
  return decode_frds(read_file(path), path.string());
}

std::string encode_pgm(const DepthImage& image) {
  std::string out = "P5\n" + std::to_string(image.cols()) + ' ' + std::to_string(image.rows()) + "\n65535\n";
  for (int r = 0; r < image.rows(); ++r) {
    for (int c = 0; c < image.cols(); ++c) {
      const double mm = std::clamp(std::round(image.at(r, c) * 1000.0), 0.0, 65535.0);
      const auto v = static_cast<std::uint16_t>(mm);
      out.push_back(static_cast<char>(v >> 8));  // PGM samples are big-endian
      out.push_back(static_cast<char>(v & 0xffu));
    }
  }
  return out;
}

std::string encode_stl(const sim::TriangleMesh& mesh) {
  Writer w;
  std::string header = "frame tunnel world";
  header.resize(80, '\0');
  w.raw(header);
  w.u32(static_cast<std::uint32_t>(mesh.triangles.size()));
  for (const auto& t : mesh.triangles) {
    const Point3& a = mesh.vertices[t[0]];
    const Point3& b = mesh.vertices[t[1]];
    const Point3& c = mesh.vertices[t[2]];
    Point3 n = (b - a).cross(c - a);
    if (n.norm() > 0.0) n.normalize();
    for (const Point3* p : {static_cast<const Point3*>(&n), &a, &b, &c}) {
      for (int i = 0; i < 3; ++i) w.f32(static_cast<float>((*p)(i)));
    }
    w.u16(0);
  }
  return w.take();
}

namespace {

using nlohmann::json;

json vec_to_json(const Point3& p) { return json::array({p.x(), p.y(), p.z()}); }

/// Schema errors name the JSON pointer of the offending value.
[[noreturn]] void schema_error(const std::string& source, const std::string& where, const std::string& msg) {
  throw ParseError(source, std::nullopt, (where.empty() ? std::string("/") : where) + ": " + msg);
}

const json& member(const json& j, const char* key, const std::string& source, const std::string& where) {
  if (!j.is_object()) schema_error(source, where, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) schema_error(source, where, std::string("missing key '") + key + "'");
  return *it;
}

double number(const json& j, const std::string& source, const std::string& where) {
  if (!j.is_number()) schema_error(source, where, "expected a number");
  return j.get<double>();
}

template <class T>
void optional_number(const json& j, const char* key, T& out, const std::string& source,
                     const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  const std::string here = where + "/" + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) schema_error(source, here, "expected a boolean");
    out = it->template get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) schema_error(source, here, "expected an integer");
    if (std::is_unsigned_v<T> && !it->is_number_unsigned()) schema_error(source, here, "expected a non-negative integer");
    out = it->template get<T>();
  } else {
    out = static_cast<T>(number(*it, source, here));
  }
}

Point3 vec_from_json(const json& j, const std::string& source, const std::string& where) {
  if (!j.is_array() || j.size() != 3) schema_error(source, where, "expected [x, y, z]");
  return {number(j[0], source, where + "/0"), number(j[1], source, where + "/1"),
          number(j[2], source, where + "/2")};
}

Transform transform_at(const json& j, const std::string& source, const std::string& where) {
  if (!j.is_array() || j.size() != 16) schema_error(source, where, "transform must be 16 numbers");
  std::array<double, 16> v{};
  for (std::size_t i = 0; i < 16; ++i) v[i] = number(j[i], source, where + "/" + std::to_string(i));
  try {
    return Transform::from_row_major(v);
  } catch (const Error& e) {
    schema_error(source, where, e.what());
  }
}

std::string form_name(InitialTransformForm f) {
  return f == InitialTransformForm::raw ? "raw" : "about_matched_pose";
}

}  // namespace

json transform_to_json(const Transform& t) {
  json out = json::array();
  for (double v : t.row_major()) out.push_back(v);
  return out;
}

Transform transform_from_json(const json& j, const std::string& source) { return transform_at(j, source, ""); }

json report_to_json(const MergeReport& r) {
  json j;
  j["transform"] = transform_to_json(r.transform);
  j["initial_transform"] = transform_to_json(r.initial_transform);
  j["yaw_deg"] = rad2deg(r.yaw);
  j["points_m1"] = r.points_m1;
  j["points_m2"] = r.points_m2;
  j["trajectory_lengths"] = json::array({r.trajectory_length_m1, r.trajectory_length_m2});
  if (r.overlap_percent) j["overlap_percent"] = *r.overlap_percent;
  if (r.t_e) j["t_e"] = *r.t_e;
  if (r.r_e) j["r_e"] = *r.r_e;
  if (r.r_e_frobenius) j["r_e_frobenius"] = *r.r_e_frobenius;
  j["timings"] = {{"query", r.timings.query},
                  {"yaw", r.timings.yaw},
                  {"sphere", r.timings.sphere},
                  {"registration", r.timings.registration},
                  {"total", r.timings.total}};
  j["sphere_radius"] = r.sphere_radius;
  j["match"] = {{"own_timestep", r.match.own_timestep},
                {"incoming_timestep", r.match.incoming_timestep},
                {"own_position", vec_to_json(r.match.own_position)},
                {"incoming_position", vec_to_json(r.match.incoming_position)},
                {"descriptor_distance", r.match.descriptor_distance}};
  j["registration"] = {{"iterations", r.iterations},
                       {"converged", r.converged},
                       {"final_cost", r.final_cost},
                       {"correspondence_count", r.correspondence_count},
                       {"inlier_fraction", r.inlier_fraction},
                       {"submap_points_m1", r.submap_points_m1},
                       {"submap_points_m2", r.submap_points_m2}};
  return j;
}

json options_to_json(const MergeOptions& o) {
  const auto& p = o.registration;
  return {{"radius", o.radius},
          {"initial_transform_form", form_name(o.initial_form)},
          {"overlap_voxel", o.overlap_voxel},
          {"output_voxel", o.output_voxel},
          {"registration",
           {{"max_correspondence_distance", p.max_correspondence_distance},
            {"max_iterations", p.max_iterations},
            {"translation_epsilon", p.translation_epsilon},
            {"rotation_epsilon", p.rotation_epsilon},
            {"covariance_k", p.covariance_k},
            {"plane_regularization", p.plane_regularization},
            {"voxel_leaf", p.voxel_leaf},
            {"min_inlier_fraction", p.min_inlier_fraction},
            {"inlier_distance", p.inlier_distance}}}};
}

std::vector<ReportSummary> summaries_from_json(const json& j, const std::string& source) {
  std::vector<std::pair<const json*, std::string>> items;
  if (j.is_object() && j.contains("reports")) {
    const json& list = j["reports"];
    if (!list.is_array()) schema_error(source, "/reports", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) items.emplace_back(&list[i], "/reports/" + std::to_string(i));
  } else {
    items.emplace_back(&j, "");
  }
  std::vector<ReportSummary> out;
  for (const auto& [item, where] : items) {
    ReportSummary s;
    s.transform = transform_at(member(*item, "transform", source, where), source, where + "/transform");
    s.points_m1 = static_cast<std::size_t>(number(member(*item, "points_m1", source, where), source, where));
    s.points_m2 = static_cast<std::size_t>(number(member(*item, "points_m2", source, where), source, where));
    const json& lengths = member(*item, "trajectory_lengths", source, where);
    if (!lengths.is_array() || lengths.size() != 2) {
      schema_error(source, where + "/trajectory_lengths", "expected two numbers");
    }
    s.trajectory_length_m1 = number(lengths[0], source, where + "/trajectory_lengths/0");
    s.trajectory_length_m2 = number(lengths[1], source, where + "/trajectory_lengths/1");
    if (item->contains("overlap_percent")) {
      s.overlap_percent = number((*item)["overlap_percent"], source, where + "/overlap_percent");
    }
    if (item->contains("t_e")) s.t_e = number((*item)["t_e"], source, where + "/t_e");
    if (item->contains("r_e")) s.r_e = number((*item)["r_e"], source, where + "/r_e");
    const json& timings = member(*item, "timings", source, where);
    s.total_time = number(member(timings, "total", source, where + "/timings"), source, where + "/timings/total");
    out.push_back(s);
  }
  return out;
}

json world_to_json(const sim::WorldSpec& w) {
  json nodes = json::array();
  for (const auto& n : w.nodes) nodes.push_back(vec_to_json(n));
  json edges = json::array();
  for (const auto& e : w.edges) {
    edges.push_back({{"from", e.from}, {"to", e.to}, {"width", e.width}, {"height", e.height}});
  }
  return {{"nodes", nodes},
          {"edges", edges},
          {"roughness", w.roughness},
          {"profile_variation", w.profile_variation},
          {"niche_spacing", w.niche_spacing},
          {"niche_depth", w.niche_depth},
          {"seed", w.seed}};
}

namespace {

sim::WorldSpec world_at(const json& j, const std::string& source, const std::string& where) {
  sim::WorldSpec w;
  const json& nodes = member(j, "nodes", source, where);
  if (!nodes.is_array()) schema_error(source, where + "/nodes", "expected an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    w.nodes.push_back(vec_from_json(nodes[i], source, where + "/nodes/" + std::to_string(i)));
  }
  const json& edges = member(j, "edges", source, where);
  if (!edges.is_array()) schema_error(source, where + "/edges", "expected an array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string at = where + "/edges/" + std::to_string(i);
    sim::CorridorEdge e;
    if (!edges[i].contains("from") || !edges[i].contains("to")) schema_error(source, at, "edge needs from and to");
    optional_number(edges[i], "from", e.from, source, at);
    optional_number(edges[i], "to", e.to, source, at);
    optional_number(edges[i], "width", e.width, source, at);
    optional_number(edges[i], "height", e.height, source, at);
    w.edges.push_back(e);
  }
  optional_number(j, "roughness", w.roughness, source, where);
  optional_number(j, "profile_variation", w.profile_variation, source, where);
  optional_number(j, "niche_spacing", w.niche_spacing, source, where);
  optional_number(j, "niche_depth", w.niche_depth, source, where);
  optional_number(j, "seed", w.seed, source, where);
  try {
    w.validate();
  } catch (const Error& e) {
    schema_error(source, where, e.what());
  }
  return w;
}

}  // namespace

sim::WorldSpec world_from_json(const json& j, const std::string& source) { return world_at(j, source, ""); }

json run_spec_to_json(const sim::RunSpec& r) {
  json waypoints = json::array();
  for (const auto& p : r.waypoints) waypoints.push_back(vec_to_json(p));
  const auto& c = r.scan;
  return {{"name", r.name},
          {"waypoints", waypoints},
          {"local_frame", transform_to_json(r.local_frame)},
          {"scan",
           {{"channels", c.channels},
            {"vertical_fov", c.vertical_fov},
            {"horizontal_step", c.horizontal_step},
            {"azimuth_offset", c.azimuth_offset},
            {"max_range", c.max_range},
            {"noise_sigma", c.noise_sigma},
            {"seed", c.seed},
            {"step_spacing", c.step_spacing},
            {"keyframe_spacing", c.keyframe_spacing},
            {"descriptor_vertical_fov", c.descriptor_vertical_fov},
            {"descriptor_max_range", c.descriptor_max_range}}}};
}

namespace {

sim::RunSpec run_spec_at(const json& j, const std::string& source, const std::string& where) {
  sim::RunSpec r;
  const json& name = member(j, "name", source, where);
  if (!name.is_string() || name.get<std::string>().empty()) schema_error(source, where + "/name", "expected a name");
  r.name = name.get<std::string>();
  const json& waypoints = member(j, "waypoints", source, where);
  if (!waypoints.is_array()) schema_error(source, where + "/waypoints", "expected an array");
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    r.waypoints.push_back(vec_from_json(waypoints[i], source, where + "/waypoints/" + std::to_string(i)));
  }
  if (j.contains("local_frame")) r.local_frame = transform_at(j["local_frame"], source, where + "/local_frame");
  if (j.contains("scan")) {
    const json& s = j["scan"];
    auto& c = r.scan;
    optional_number(s, "channels", c.channels, source, where + "/scan");
    optional_number(s, "vertical_fov", c.vertical_fov, source, where + "/scan");
    optional_number(s, "horizontal_step", c.horizontal_step, source, where + "/scan");
    optional_number(s, "azimuth_offset", c.azimuth_offset, source, where + "/scan");
    optional_number(s, "max_range", c.max_range, source, where + "/scan");
    optional_number(s, "noise_sigma", c.noise_sigma, source, where + "/scan");
    optional_number(s, "seed", c.seed, source, where + "/scan");
    optional_number(s, "step_spacing", c.step_spacing, source, where + "/scan");
    optional_number(s, "keyframe_spacing", c.keyframe_spacing, source, where + "/scan");
    optional_number(s, "descriptor_vertical_fov", c.descriptor_vertical_fov, source, where + "/scan");
    optional_number(s, "descriptor_max_range", c.descriptor_max_range, source, where + "/scan");
  }
  try {
    r.scan.validate();
  } catch (const Error& e) {
    schema_error(source, where + "/scan", e.what());
  }
  return r;
}

}  // namespace

sim::RunSpec run_spec_from_json(const json& j, const std::string& source) { return run_spec_at(j, source, ""); }

json scenario_to_json(const sim::ScenarioSpec& spec) {
  json runs = json::array();
  for (const auto& r : spec.runs) runs.push_back(run_spec_to_json(r));
  return {{"name", spec.name}, {"radius", spec.radius}, {"world", world_to_json(spec.world)}, {"runs", runs}};
}

sim::ScenarioSpec scenario_from_json(const json& j, const std::string& source) {
  sim::ScenarioSpec spec;
  const json& name = member(j, "name", source, "");
  if (!name.is_string()) schema_error(source, "/name", "expected a string");
  spec.name = name.get<std::string>();
  optional_number(j, "radius", spec.radius, source, "");
  if (!(spec.radius > 0.0)) schema_error(source, "/radius", "radius must be positive");
  spec.world = world_at(member(j, "world", source, ""), source, "/world");
  const json& runs = member(j, "runs", source, "");
  if (!runs.is_array() || runs.empty()) schema_error(source, "/runs", "expected a non-empty array");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    spec.runs.push_back(run_spec_at(runs[i], source, "/runs/" + std::to_string(i)));
  }
  return spec;
}

json ground_truth_sidecar(const sim::ScenarioSpec& spec, const sim::Scenario& scenario) {
  json runs = json::array();
  for (std::size_t i = 0; i < scenario.runs.size(); ++i) {
    const auto& r = scenario.runs[i];
    runs.push_back({{"name", spec.runs[i].name},
                    {"frame_offset", transform_to_json(r.frame_offset)},
                    {"trajectory_length", r.run.trajectory.length()},
                    {"points", r.run.map.size()},
                    {"records", r.run.records.size()}});
  }
  json pairs = json::array();
  for (std::size_t i = 1; i < scenario.runs.size(); ++i) {
    pairs.push_back({{"own", spec.runs.front().name},
                     {"incoming", spec.runs[i].name},
                     {"transform", transform_to_json(sim::ground_truth_transform(scenario.runs.front(),
                                                                                 scenario.runs[i]))}});
  }
  return {{"scenario", spec.name}, {"world_id", scenario.world.id()}, {"runs", runs}, {"ground_truth", pairs}};
}

std::vector<Transform> ground_truths_from_json(const json& j, const std::string& source) {
  if (j.is_object() && j.contains("ground_truth")) {
    const json& list = j["ground_truth"];
    if (!list.is_array()) schema_error(source, "/ground_truth", "expected an array");
    std::vector<Transform> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string at = "/ground_truth/" + std::to_string(i);
      out.push_back(transform_at(member(list[i], "transform", source, at), source, at + "/transform"));
    }
    return out;
  }
  return {transform_at(member(j, "transform", source, ""), source, "/transform")};
}

json parse_json(const std::string& bytes, const std::string& source) {
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(source, e.byte, "malformed JSON");
  }
}

json read_json(const std::filesystem::path& path) { return parse_json(read_file(path), path.string()); }

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

RunFiles run_files(const std::filesystem::path& prefix) {
  const std::string p = prefix.string();
  return {p + ".pcd", p + "_trajectory.csv", p + ".frds"};
}

void write_run(const std::filesystem::path& prefix, const RobotRun& run) {
  const RunFiles f = run_files(prefix);
  write_pcd(f.map, run.map);
  write_trajectory(f.trajectory, run.trajectory);
  write_frds(f.descriptors, run.records);
}

RobotRun read_run(const RunFiles& files) {
  RobotRun run;
  run.map = read_pcd(files.map);
  run.trajectory = read_trajectory(files.trajectory);
  run.records = read_frds(files.descriptors);
  try {
    run.validate();
  } catch (const Error& e) {
    throw ParseError(files.descriptors.string(), std::nullopt, e.what());
  }
  return run;
}

}  // namespace frame::io
