#include "frame/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace frame::sim {

namespace {

constexpr double kCellSize = 0.5;  // corridor surface tessellation, meters
constexpr double kJunctionMargin = 0.5;
constexpr double kNicheClearance = 3.0;  // keeps niches away from junction mouths

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t key(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

/// Uniform in [-1, 1].
double signed_noise(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return 2.0 * keyed_uniform(seed, stream, index) - 1.0;
}

int direction_index(const Point3& u) {
  if (u.x() > 0.5) return 0;
  if (u.y() > 0.5) return 1;
  if (u.x() < -0.5) return 2;
  return 3;
}

Point3 direction_vector(int d) {
  switch (d) {
    case 0: return {1, 0, 0};
    case 1: return {0, 1, 0};
    case 2: return {-1, 0, 0};
    default: return {0, -1, 0};
  }
}

/// Full-height recess in one side wall.
struct Niche {
  double begin = 0.0;
  double end = 0.0;
  double depth = 0.0;
  int side = 1;  // +1 left of the axis, -1 right
};

/// Slow width and height undulation of one corridor, plus wall niches.
struct Profile {
  double width = 0.0;
  double height = 0.0;
  double variation = 0.0;
  std::array<double, 3> wavelength{};
  std::array<double, 3> phase{};
  std::array<double, 3> height_phase{};
  std::vector<Niche> niches;

  static double clamp_min(double v, double lo) { return v < lo ? lo : v; }

  double wave(double s, const std::array<double, 3>& phases) const {
    static constexpr std::array<double, 3> kWeights{0.5, 0.3, 0.2};
    double v = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      v += kWeights[i] * std::sin(2.0 * kPi * s / wavelength[i] + phases[i]);
    }
    return v;
  }
  double width_at(double s) const { return clamp_min(width + variation * wave(s, phase), 2.5); }
  double height_at(double s) const {
    return clamp_min(height + 0.5 * variation * wave(s, height_phase), 2.5);
  }
  /// Outward displacement of the wall on `side` at arclength s.
  double recess(double s, int side) const {
    double d = 0.0;
    for (const auto& n : niches) {
      if (n.side != side || s <= n.begin || s >= n.end) continue;
      const double ramp = std::min({1.0, (s - n.begin) / kCellSize, (n.end - s) / kCellSize});
      d = std::max(d, n.depth * ramp);
    }
    return d;
  }
  double max_recess() const {
    double d = 0.0;
    for (const auto& n : niches) d = std::max(d, n.depth);
    return d;
  }
  double max_width() const { return width + variation; }
  double max_height() const { return height + 0.5 * variation; }
};

struct CorridorLayout {
  std::size_t edge = 0;
  Point3 origin;   // center of the `from` node at floor level
  Point3 axis;     // unit, from -> to
  Point3 lateral;  // unit, left of axis
  double s0 = 0.0;
  double s1 = 0.0;
  bool capped_start = false;
  bool capped_end = false;
  Profile profile;
};

struct JunctionLayout {
  Point3 center;
  double half = 0.0;
  double height = 0.0;
  std::array<int, 4> corridor{-1, -1, -1, -1};  // corridor per direction
  std::array<double, 4> mouth_s{};              // profile arclength at the mouth
};

struct Layout {
  std::vector<JunctionLayout> junctions;
  std::vector<CorridorLayout> corridors;
};

Layout compute_layout(const WorldSpec& spec) {
  Layout layout;
  const std::size_t n = spec.nodes.size();
  layout.junctions.resize(n);
  for (std::size_t i = 0; i < n; ++i) layout.junctions[i].center = spec.nodes[i];

  layout.corridors.resize(spec.edges.size());
  for (std::size_t e = 0; e < spec.edges.size(); ++e) {
    const auto& edge = spec.edges[e];
    CorridorLayout& c = layout.corridors[e];
    c.edge = e;
    const Point3 a = spec.nodes[static_cast<std::size_t>(edge.from)];
    const Point3 b = spec.nodes[static_cast<std::size_t>(edge.to)];
    c.origin = a;
    c.axis = (b - a).normalized();
    c.lateral = Point3(-c.axis.y(), c.axis.x(), 0.0);
    Profile& p = c.profile;
    p.width = edge.width;
    p.height = edge.height;
    p.variation = spec.profile_variation;
    for (std::size_t i = 0; i < 3; ++i) {
      p.wavelength[i] = 6.0 + 20.0 * keyed_uniform(spec.seed, 1000 + e, i);
      p.phase[i] = 2.0 * kPi * keyed_uniform(spec.seed, 2000 + e, i);
      p.height_phase[i] = 2.0 * kPi * keyed_uniform(spec.seed, 3000 + e, i);
    }
  }

  std::vector<int> degree(n, 0);
  for (const auto& edge : spec.edges) {
    ++degree[static_cast<std::size_t>(edge.from)];
    ++degree[static_cast<std::size_t>(edge.to)];
  }
  for (std::size_t e = 0; e < spec.edges.size(); ++e) {
    const auto& edge = spec.edges[e];
    const auto& p = layout.corridors[e].profile;
    for (int node : {edge.from, edge.to}) {
      // Dead ends are capped corridor ends, not rooms.
      if (degree[static_cast<std::size_t>(node)] < 2) continue;
      JunctionLayout& j = layout.junctions[static_cast<std::size_t>(node)];
      j.half = std::max(j.half, 0.5 * p.max_width() + kJunctionMargin);
      j.height = std::max(j.height, p.max_height() + kJunctionMargin);
    }
  }

  for (std::size_t e = 0; e < spec.edges.size(); ++e) {
    const auto& edge = spec.edges[e];
    CorridorLayout& c = layout.corridors[e];
    const double length = (spec.nodes[static_cast<std::size_t>(edge.to)] - c.origin).norm();
    auto& ja = layout.junctions[static_cast<std::size_t>(edge.from)];
    auto& jb = layout.junctions[static_cast<std::size_t>(edge.to)];
    c.s0 = ja.half > 0.0 ? ja.half : -kJunctionMargin;
    c.s1 = jb.half > 0.0 ? length - jb.half : length + kJunctionMargin;
    c.capped_start = ja.half <= 0.0;
    c.capped_end = jb.half <= 0.0;
    if (spec.niche_spacing > 0.0) {
      std::uint64_t i = 0;
      double at = c.s0 + kNicheClearance +
                  spec.niche_spacing * keyed_uniform(spec.seed, 4000 + e, i++);
      while (true) {
        const double len = 2.0 + 3.0 * keyed_uniform(spec.seed, 4000 + e, i++);
        if (at + len > c.s1 - kNicheClearance) break;
        Niche n;
        n.begin = at;
        n.end = at + len;
        n.depth = spec.niche_depth * (0.4 + 0.6 * keyed_uniform(spec.seed, 4000 + e, i++));
        n.side = keyed_uniform(spec.seed, 4000 + e, i++) < 0.5 ? 1 : -1;
        c.profile.niches.push_back(n);
        at = n.end + spec.niche_spacing * (0.5 + keyed_uniform(spec.seed, 4000 + e, i++));
      }
    }
    if (c.s1 - c.s0 < kCellSize) {
      throw Error("corridor " + std::to_string(e) + " is shorter than its junctions");
    }
    const int da = direction_index(c.axis);
    const int db = (da + 2) % 4;
    if (ja.corridor[static_cast<std::size_t>(da)] >= 0 ||
        jb.corridor[static_cast<std::size_t>(db)] >= 0) {
      throw Error("two corridors leave a junction in the same direction");
    }
    ja.corridor[static_cast<std::size_t>(da)] = static_cast<int>(e);
    ja.mouth_s[static_cast<std::size_t>(da)] = c.s0;
    jb.corridor[static_cast<std::size_t>(db)] = static_cast<int>(e);
    jb.mouth_s[static_cast<std::size_t>(db)] = c.s1;
  }
  return layout;
}

class MeshBuilder {
 public:
  std::uint32_t vertex(const Point3& p) {
    mesh_.vertices.push_back(p);
    return static_cast<std::uint32_t>(mesh_.vertices.size() - 1);
  }
  void triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c) { mesh_.triangles.push_back({a, b, c}); }
  void quad(const Point3& a, const Point3& b, const Point3& c, const Point3& d) {
    const auto ia = vertex(a);
    const auto ib = vertex(b);
    const auto ic = vertex(c);
    const auto id = vertex(d);
    triangle(ia, ib, ic);
    triangle(ia, ic, id);
  }
  TriangleMesh take() { return std::move(mesh_); }

 private:
  TriangleMesh mesh_;
};

void emit_corridor(const WorldSpec& spec, const CorridorLayout& c, MeshBuilder& mb) {
  const Profile& p = c.profile;
  const int nb = static_cast<int>(std::ceil((p.max_width() + 2.0 * p.max_recess()) / kCellSize));
  const int nh = static_cast<int>(std::ceil(p.max_height() / kCellSize));
  const int perimeter = 2 * nb + 2 * nh;
  const int rings = std::max(2, static_cast<int>(std::ceil((c.s1 - c.s0) / kCellSize)) + 1);

  std::vector<std::uint32_t> prev;
  std::vector<std::uint32_t> cur(static_cast<std::size_t>(perimeter));
  for (int r = 0; r < rings; ++r) {
    const double s = c.s0 + (c.s1 - c.s0) * r / (rings - 1);
    const double w = p.width_at(s);
    const double h = p.height_at(s);
    const double left = 0.5 * w + p.recess(s, 1);
    const double right = -0.5 * w - p.recess(s, -1);
    const bool end_ring = r == 0 || r == rings - 1;
    for (int k = 0; k < perimeter; ++k) {
      double l = 0.0;
      double z = 0.0;
      double dl = 0.0;  // inward direction
      double dz = 0.0;
      int t = 0;
      if (k < nb) {
        t = k;
        l = right + (left - right) * t / nb, z = 0.0, dz = 1.0;
      } else if (k < nb + nh) {
        t = k - nb;
        l = left, z = h * t / nh, dl = -1.0;
      } else if (k < 2 * nb + nh) {
        t = k - nb - nh;
        l = left - (left - right) * t / nb, z = h, dz = -1.0;
      } else {
        t = k - 2 * nb - nh;
        l = right, z = h - h * t / nh, dl = 1.0;
      }
      if (!end_ring && t != 0 && spec.roughness > 0.0) {
        const double bump =
            spec.roughness * signed_noise(spec.seed, 10000 + c.edge,
                                          static_cast<std::uint64_t>(r) * 4096u +
                                              static_cast<std::uint64_t>(k));
        l += dl * bump;
        z += dz * bump;
      }
      const Point3 v = c.origin + c.axis * s + c.lateral * l + Point3(0.0, 0.0, z);
      cur[static_cast<std::size_t>(k)] = mb.vertex(v);
    }
    if ((r == 0 && c.capped_start) || (r == rings - 1 && c.capped_end)) {
      // Fan over the rectangular end ring; corners are at 0, nb, nb+nh, 2nb+nh.
      const auto corner = [&](int k) { return cur[static_cast<std::size_t>(k)]; };
      const std::uint32_t a = corner(0);
      const std::uint32_t b = corner(nb);
      const std::uint32_t cc = corner(nb + nh);
      const std::uint32_t d = corner(2 * nb + nh);
      mb.triangle(a, b, cc);
      mb.triangle(a, cc, d);
    }
    if (r > 0) {
      for (int k = 0; k < perimeter; ++k) {
        const auto k1 = static_cast<std::size_t>((k + 1) % perimeter);
        const auto k0 = static_cast<std::size_t>(k);
        mb.triangle(prev[k0], prev[k1], cur[k1]);
        mb.triangle(prev[k0], cur[k1], cur[k0]);
      }
    }
    prev = cur;
  }
}

void emit_junction(const JunctionLayout& j, const Layout& layout, MeshBuilder& mb) {
  const Point3& c = j.center;
  const double a = j.half;
  const double top = c.z() + j.height;
  const auto at = [&](double x, double y, double z) { return Point3(c.x() + x, c.y() + y, z); };

  mb.quad(at(-a, -a, c.z()), at(a, -a, c.z()), at(a, a, c.z()), at(-a, a, c.z()));
  mb.quad(at(-a, -a, top), at(a, -a, top), at(a, a, top), at(-a, a, top));

  for (int d = 0; d < 4; ++d) {
    const Point3 out = direction_vector(d);
    const Point3 side(-out.y(), out.x(), 0.0);
    const auto wall = [&](double l, double z) {
      const Point3 p = c + out * a + side * l;
      return Point3(p.x(), p.y(), c.z() + z);
    };
    const double h = j.height;
    const int corridor = j.corridor[static_cast<std::size_t>(d)];
    if (corridor < 0) {
      mb.quad(wall(-a, 0), wall(a, 0), wall(a, h), wall(-a, h));
      continue;
    }
    const Profile& p = layout.corridors[static_cast<std::size_t>(corridor)].profile;
    const double s = j.mouth_s[static_cast<std::size_t>(d)];
    const double mw = 0.5 * p.width_at(s);
    const double mh = p.height_at(s);
    mb.quad(wall(-a, 0), wall(-mw, 0), wall(-mw, h), wall(-a, h));
    mb.quad(wall(mw, 0), wall(a, 0), wall(a, h), wall(mw, h));
    mb.quad(wall(-mw, mh), wall(mw, mh), wall(mw, h), wall(-mw, h));
  }
}

std::uint64_t hash_spec(const WorldSpec& spec) {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : spec.nodes) mix(p.data(), 3 * sizeof(double));
  for (const auto& e : spec.edges) {
    mix(&e.from, sizeof(e.from));
    mix(&e.to, sizeof(e.to));
    mix(&e.width, sizeof(e.width));
    mix(&e.height, sizeof(e.height));
  }
  mix(&spec.roughness, sizeof(spec.roughness));
  mix(&spec.profile_variation, sizeof(spec.profile_variation));
  mix(&spec.niche_spacing, sizeof(spec.niche_spacing));
  mix(&spec.niche_depth, sizeof(spec.niche_depth));
  mix(&spec.seed, sizeof(spec.seed));
  return h;
}

}  // namespace

double keyed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return static_cast<double>(key(seed, stream, index) >> 11) * 0x1.0p-53;
}

double keyed_normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const std::uint64_t k = key(seed, stream, index);
  const double u1 = (static_cast<double>(k >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(splitmix64(k) >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

void WorldSpec::validate() const {
  if (nodes.empty() || edges.empty()) throw Error("world needs at least one corridor");
  if (!(roughness >= 0.0) || !(profile_variation >= 0.0)) {
    throw Error("roughness and profile variation must be >= 0");
  }
  if (!(niche_spacing >= 0.0) || !(niche_depth >= 0.0)) {
    throw Error("niche spacing and depth must be >= 0");
  }
  const double z = nodes.front().z();
  for (const auto& n : nodes) {
    if (!is_finite(n)) throw Error("world node is not finite");
    if (n.z() != z) throw Error("all world nodes must share one floor height");
  }
  for (const auto& e : edges) {
    const auto count = static_cast<int>(nodes.size());
    if (e.from < 0 || e.to < 0 || e.from >= count || e.to >= count || e.from == e.to) {
      throw Error("corridor references an invalid node");
    }
    if (!(e.width > 0.0) || !(e.height > 0.0)) throw Error("corridor width and height must be > 0");
    const Point3 d = nodes[static_cast<std::size_t>(e.to)] - nodes[static_cast<std::size_t>(e.from)];
    if (d.x() != 0.0 && d.y() != 0.0) throw Error("corridors must be parallel to the x or y axis");
  }
  // Union-find connectivity over nodes that carry corridors.
  std::vector<int> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  const auto root = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    }
    return x;
  };
  for (const auto& e : edges) parent[static_cast<std::size_t>(root(e.from))] = root(e.to);
  const int r0 = root(0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (root(static_cast<int>(i)) != r0) throw Error("world graph is disconnected");
  }
}

std::optional<double> intersect_triangle(const Point3& origin, const Point3& direction,
                                         const Point3& a, const Point3& b, const Point3& c) {
  constexpr double kParallel = 1e-14;
  // Slack on the barycentric bounds keeps rays along a shared edge from slipping through.
  constexpr double kEdge = 1e-12;
  const Point3 e1 = b - a;
  const Point3 e2 = c - a;
  const Point3 pvec = direction.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < kParallel) return std::nullopt;
  const double inv = 1.0 / det;
  const Point3 tvec = origin - a;
  const double u = tvec.dot(pvec) * inv;
  if (u < -kEdge || u > 1.0 + kEdge) return std::nullopt;
  const Point3 qvec = tvec.cross(e1);
  const double v = direction.dot(qvec) * inv;
  if (v < -kEdge || u + v > 1.0 + kEdge) return std::nullopt;
  const double t = e2.dot(qvec) * inv;
  if (t <= 1e-9) return std::nullopt;
  return t;
}

World::World(WorldSpec spec, TriangleMesh mesh)
    : spec_(std::move(spec)), mesh_(std::move(mesh)), id_(hash_spec(spec_)) {
  tri_order_.resize(mesh_.triangles.size());
  std::iota(tri_order_.begin(), tri_order_.end(), 0u);
  if (!tri_order_.empty()) build(0, static_cast<std::uint32_t>(tri_order_.size()));
}

std::uint32_t World::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  Eigen::Vector3d clo = lo;
  Eigen::Vector3d chi = hi;
  const auto centroid = [&](std::uint32_t t) {
    const auto& tri = mesh_.triangles[t];
    return (mesh_.vertices[tri[0]] + mesh_.vertices[tri[1]] + mesh_.vertices[tri[2]]) / 3.0;
  };
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& tri = mesh_.triangles[tri_order_[i]];
    for (auto v : tri) {
      lo = lo.cwiseMin(mesh_.vertices[v]);
      hi = hi.cwiseMax(mesh_.vertices[v]);
    }
    const Point3 cc = centroid(tri_order_[i]);
    clo = clo.cwiseMin(cc);
    chi = chi.cwiseMax(cc);
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  const Eigen::Vector3d extent = chi - clo;
  if (end - begin <= 4 || extent.maxCoeff() <= 0.0) {
    nodes_[id].first = begin;
    nodes_[id].count = end - begin;
    return id;
  }
  int axis = 0;
  extent.maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(tri_order_.begin() + begin, tri_order_.begin() + mid, tri_order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = centroid(a)(axis);
                     const double cb = centroid(b)(axis);
                     return ca != cb ? ca < cb : a < b;
                   });
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  nodes_[id].first = left;
  nodes_[id].count = 0;
  nodes_[id].right = right;
  return id;
}

namespace {

bool slab_hit(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, const Point3& origin,
              const Point3& inv_dir, double max_t, double& t_enter) {
  double t0 = 0.0;
  double t1 = max_t;
  for (int a = 0; a < 3; ++a) {
    double tn = (lo(a) - origin(a)) * inv_dir(a);
    double tf = (hi(a) - origin(a)) * inv_dir(a);
    if (tn > tf) std::swap(tn, tf);
    // NaN from 0 * inf means the ray lies in the slab plane; keep it.
    if (tn > t0) t0 = tn;
    if (tf < t1) t1 = tf;
    if (t0 > t1 * (1.0 + 1e-12) + 1e-12) return false;
  }
  t_enter = t0;
  return true;
}

}  // namespace

std::optional<RayHit> World::cast(const Point3& origin, const Point3& direction,
                                  double max_distance) const {
  if (nodes_.empty()) return std::nullopt;
  const Point3 inv_dir(1.0 / direction.x(), 1.0 / direction.y(), 1.0 / direction.z());
  std::optional<RayHit> best;
  double best_t = max_distance;
  std::array<std::uint32_t, 64> stack{};
  int top = 0;
  stack[static_cast<std::size_t>(top++)] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[static_cast<std::size_t>(--top)]];
    double t_enter = 0.0;
    if (!slab_hit(node.lo, node.hi, origin, inv_dir, best_t, t_enter)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const std::uint32_t t = tri_order_[i];
        const auto& tri = mesh_.triangles[t];
        const auto d = intersect_triangle(origin, direction, mesh_.vertices[tri[0]],
                                          mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
        if (d && *d <= best_t && (!best || *d < best->distance || t < best->triangle)) {
          if (best && *d == best->distance && t > best->triangle) continue;
          best = RayHit{*d, t};
          best_t = *d;
        }
      }
      continue;
    }
    const Node& l = nodes_[node.first];
    const Node& r = nodes_[node.right];
    double tl = 0.0;
    double tr = 0.0;
    const bool hl = slab_hit(l.lo, l.hi, origin, inv_dir, best_t, tl);
    const bool hr = slab_hit(r.lo, r.hi, origin, inv_dir, best_t, tr);
    // Push the farther child first so the nearer one is visited next.
    if (hl && hr) {
      if (tl <= tr) {
        stack[static_cast<std::size_t>(top++)] = node.right;
        stack[static_cast<std::size_t>(top++)] = node.first;
      } else {
        stack[static_cast<std::size_t>(top++)] = node.first;
        stack[static_cast<std::size_t>(top++)] = node.right;
      }
    } else if (hl) {
      stack[static_cast<std::size_t>(top++)] = node.first;
    } else if (hr) {
      stack[static_cast<std::size_t>(top++)] = node.right;
    }
  }
  return best;
}

std::optional<RayHit> World::cast_linear(const Point3& origin, const Point3& direction,
                                         double max_distance) const {
  std::optional<RayHit> best;
  for (std::uint32_t t = 0; t < mesh_.triangles.size(); ++t) {
    const auto& tri = mesh_.triangles[t];
    const auto d = intersect_triangle(origin, direction, mesh_.vertices[tri[0]],
                                      mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
    if (d && *d <= max_distance && (!best || *d < best->distance)) best = RayHit{*d, t};
  }
  return best;
}

bool World::in_free_space(const Point3& p) const {
  const Layout layout = compute_layout(spec_);
  const double floor_z = spec_.nodes.front().z();
  const double margin = spec_.roughness + 1e-6;
  const double z = p.z() - floor_z;
  for (const auto& j : layout.junctions) {
    if (j.half <= 0.0) continue;
    if (std::abs(p.x() - j.center.x()) < j.half && std::abs(p.y() - j.center.y()) < j.half &&
        z > 0.0 && z < j.height) {
      return true;
    }
  }
  for (const auto& c : layout.corridors) {
    const Point3 rel = p - c.origin;
    const double s = rel.dot(c.axis);
    if (s < c.s0 || s > c.s1) continue;
    const double l = rel.dot(c.lateral);
    if (std::abs(l) < 0.5 * c.profile.width_at(s) - margin && z > margin &&
        z < c.profile.height_at(s) - margin) {
      return true;
    }
  }
  return false;
}

World generate_world(const WorldSpec& spec) {
  spec.validate();
  const Layout layout = compute_layout(spec);
  MeshBuilder mb;
  for (const auto& c : layout.corridors) emit_corridor(spec, c, mb);
  for (const auto& j : layout.junctions) {
    if (j.half > 0.0) emit_junction(j, layout, mb);
  }
  return World(spec, mb.take());
}

}  // namespace frame::sim
