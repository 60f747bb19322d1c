#pragma once

#include "frame/descriptors.hpp"
#include "frame/geometry.hpp"
#include "frame/merge.hpp"
#include "frame/overlap_index.hpp"
#include "frame/sim.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace frame::testing {

inline Point3 random_point(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  return {u(rng), u(rng), u(rng)};
}

inline Point3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Point3 v;
  do {
    v = {n(rng), n(rng), n(rng)};
  } while (v.norm() < 1e-6);
  return v.normalized();
}

/// Rotation about a uniformly random axis by an angle drawn from
/// [-max_angle, max_angle], translation uniform in a ball of max_translation.
inline Transform random_transform(std::mt19937_64& rng, double max_translation,
                                  double max_angle) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Matrix3 r = Eigen::AngleAxisd(max_angle * u(rng), random_unit(rng)).toRotationMatrix();
  Point3 t;
  do {
    t = {u(rng), u(rng), u(rng)};
  } while (t.norm() > 1.0);
  return Transform(r, max_translation * t);
}

inline PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back(random_point(rng, extent));
  return c;
}

inline DescriptorRecord random_record(std::mt19937_64& rng, std::uint32_t timestep) {
  std::normal_distribution<double> n(0.0, 1.0);
  DescriptorRecord r;
  double sum = 0.0;
  for (auto& v : r.q.values) {
    v = n(rng);
    sum += v * v;
  }
  for (auto& v : r.q.values) v /= std::sqrt(sum);
  for (auto& v : r.w.values) v = 1.0 + std::abs(n(rng));
  r.position = random_point(rng, 100.0);
  r.timestep = timestep;
  return r;
}

inline double q_distance(const QueryDescriptor& a, const QueryDescriptor& b) {
  double s = 0.0;
  for (int i = 0; i < kDescriptorSize; ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Exhaustive argmin over every (own, incoming) pair with the same tie rule
/// as the index: smaller own timestep, then smaller incoming timestep.
inline OverlapMatch brute_force_best_pair(std::span<const DescriptorRecord> own,
                                          std::span<const DescriptorRecord> incoming) {
  OverlapMatch best;
  double best_sq = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& b : incoming) {
    for (const auto& a : own) {
      double s = 0.0;
      for (int i = 0; i < kDescriptorSize; ++i) {
        const double d = a.q.values[i] - b.q.values[i];
        s += d * d;
      }
      const bool better =
          !found || s < best_sq ||
          (s == best_sq && (a.timestep < best.own_timestep ||
                            (a.timestep == best.own_timestep && b.timestep < best.incoming_timestep)));
      if (better) {
        found = true;
        best_sq = s;
        best.own_timestep = a.timestep;
        best.incoming_timestep = b.timestep;
        best.own_position = a.position;
        best.incoming_position = b.position;
      }
    }
  }
  best.descriptor_distance = std::sqrt(best_sq);
  return best;
}

/// Straight box tunnel along +x with flat walls: half width 2.5, height 4.
inline sim::WorldSpec straight_tunnel(double length = 50.0) {
  sim::WorldSpec w;
  w.nodes = {Point3(0, 0, 0), Point3(length, 0, 0)};
  w.edges = {{0, 1, 5.0, 4.0}};
  w.roughness = 0.0;
  w.profile_variation = 0.0;
  w.niche_spacing = 0.0;
  w.seed = 0;
  return w;
}

/// T-junction: a 40 m corridor along x with a 30 m branch going +y from
/// its midpoint.
inline sim::WorldSpec t_junction() {
  sim::WorldSpec w;
  w.nodes = {Point3(0, 0, 0), Point3(40, 0, 0), Point3(80, 0, 0), Point3(40, 30, 0)};
  w.edges = {{0, 1, 5.0, 4.0}, {1, 2, 5.0, 4.0}, {1, 3, 4.0, 4.0}};
  w.roughness = 0.05;
  w.seed = 7;
  return w;
}

/// Simulated scenarios are expensive; each test binary keeps the ones it
/// has already built.
inline const sim::Scenario& cached_scenario(const std::string& name, std::uint64_t seed) {
  static std::map<std::pair<std::string, std::uint64_t>, sim::Scenario> cache;
  const auto key = std::make_pair(name, seed);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, sim::simulate_scenario(sim::scenario_by_name(name, seed))).first;
  }
  return it->second;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("frame_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace frame::testing
