#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace frame {

/// Exact k-d tree over fixed-dimension points under squared Euclidean
/// distance. Queries never prune a subtree that could hold a point at the
/// current best distance, so ties are resolved by the smallest input index
/// exactly as a linear scan would resolve them.
template <int Dim>
class KdTree {
 public:
  using Point = std::array<double, Dim>;

  struct Neighbor {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  KdTree() = default;

  explicit KdTree(std::span<const Point> points, std::size_t leaf_size = 16)
      : leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
    const std::size_t n = points.size();
    data_.resize(n * Dim);
    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    if (n == 0) return;
    std::vector<std::size_t> perm(order_);
    nodes_.reserve(2 * (n / leaf_size_ + 1));
    build(points, perm, 0, n);
    order_ = std::move(perm);
    for (std::size_t pos = 0; pos < n; ++pos) {
      std::copy(points[order_[pos]].begin(), points[order_[pos]].end(),
                data_.begin() + static_cast<std::ptrdiff_t>(pos * Dim));
    }
  }

  std::size_t size() const { return order_.size(); }
  bool empty() const { return order_.empty(); }

  /// Nearest point with squared distance <= max_squared_distance; ties go to
  /// the smaller input index.
  std::optional<Neighbor> nearest(
      const double* query,
      double max_squared_distance = std::numeric_limits<double>::infinity()) const {
    if (empty()) return std::nullopt;
    Best best{max_squared_distance, kNone};
    std::array<double, Dim> offsets{};
    search_nearest(0, query, 0.0, offsets, best);
    if (best.index == kNone) return std::nullopt;
    return Neighbor{order_[best.index], best.squared_distance};
  }

  std::optional<Neighbor> nearest(const Point& query, double max_squared_distance =
                                                          std::numeric_limits<double>::infinity()) const {
    return nearest(query.data(), max_squared_distance);
  }

  /// The k nearest points sorted by (distance, index).
  std::vector<Neighbor> knn(const double* query, std::size_t k) const {
    std::vector<Neighbor> heap;
    if (empty() || k == 0) return heap;
    heap.reserve(k + 1);
    std::array<double, Dim> offsets{};
    search_knn(0, query, 0.0, offsets, k, heap);
    std::sort_heap(heap.begin(), heap.end(), neighbor_less);
    return heap;
  }

  /// Squared distance accumulated dimension by dimension; stops early once
  /// the partial sum exceeds bound. Values not exceeding bound are complete.
  static double squared_distance(const double* a, const double* b, double bound) {
    double sum = 0.0;
    constexpr int kChunk = 8;
    int d = 0;
    for (; d + kChunk <= Dim; d += kChunk) {
      for (int j = 0; j < kChunk; ++j) {
        const double diff = a[d + j] - b[d + j];
        sum += diff * diff;
      }
      if (sum > bound) return sum;
    }
    for (; d < Dim; ++d) {
      const double diff = a[d] - b[d];
      sum += diff * diff;
    }
    return sum;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  // Incremental bounds carry rounding error; shrink them so exact ties survive.
  static constexpr double kBoundSlack = 1.0 - 1e-12;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int split_dim = -1;  // -1 marks a leaf
    double split_value = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
  };

  struct Best {
    double squared_distance;
    std::size_t index;  // position in tree order
  };

  static bool neighbor_less(const Neighbor& a, const Neighbor& b) {
    if (a.squared_distance != b.squared_distance) return a.squared_distance < b.squared_distance;
    return a.index < b.index;
  }

  const double* point_at(std::size_t pos) const { return data_.data() + pos * Dim; }

  std::uint32_t build(std::span<const Point> points, std::vector<std::size_t>& perm,
                      std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= leaf_size_) return id;

    int best_dim = 0;
    double best_spread = -1.0;
    for (int d = 0; d < Dim; ++d) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i = begin; i < end; ++i) {
        const double v = points[perm[i]][static_cast<std::size_t>(d)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = d;
      }
    }
    if (best_spread <= 0.0) return id;  // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    const auto dim = static_cast<std::size_t>(best_dim);
    std::nth_element(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                     perm.begin() + static_cast<std::ptrdiff_t>(mid),
                     perm.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                       if (points[a][dim] != points[b][dim]) return points[a][dim] < points[b][dim];
                       return a < b;
                     });
    const double split = points[perm[mid]][dim];
    const std::uint32_t left = build(points, perm, begin, mid);
    const std::uint32_t right = build(points, perm, mid, end);
    Node& node = nodes_[id];
    node.split_dim = best_dim;
    node.split_value = split;
    node.left = left;
    node.right = right;
    return id;
  }

  void search_nearest(std::uint32_t id, const double* q, double lower_bound,
                      std::array<double, Dim>& offsets, Best& best) const {
    const Node& node = nodes_[id];
    if (node.split_dim < 0) {
      for (std::size_t pos = node.begin; pos < node.end; ++pos) {
        const double d2 = squared_distance(q, point_at(pos), best.squared_distance);
        if (d2 < best.squared_distance ||
            (d2 == best.squared_distance && (best.index == kNone || order_[pos] < order_[best.index]))) {
          best = {d2, pos};
        }
      }
      return;
    }
    const auto dim = static_cast<std::size_t>(node.split_dim);
    const double cut = q[dim] - node.split_value;
    const std::uint32_t near = cut < 0.0 ? node.left : node.right;
    const std::uint32_t far = cut < 0.0 ? node.right : node.left;
    search_nearest(near, q, lower_bound, offsets, best);
    const double saved = offsets[dim];
    const double far_bound = lower_bound - saved * saved + cut * cut;
    if (far_bound * kBoundSlack <= best.squared_distance) {
      offsets[dim] = cut;
      search_nearest(far, q, far_bound, offsets, best);
      offsets[dim] = saved;
    }
  }

  void search_knn(std::uint32_t id, const double* q, double lower_bound,
                  std::array<double, Dim>& offsets, std::size_t k,
                  std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[id];
    if (node.split_dim < 0) {
      for (std::size_t pos = node.begin; pos < node.end; ++pos) {
        const double worst = heap.size() < k ? std::numeric_limits<double>::infinity()
                                             : heap.front().squared_distance;
        const double d2 = squared_distance(q, point_at(pos), worst);
        if (d2 > worst) continue;
        const Neighbor candidate{order_[pos], d2};
        if (heap.size() < k) {
          heap.push_back(candidate);
          std::push_heap(heap.begin(), heap.end(), neighbor_less);
        } else if (neighbor_less(candidate, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), neighbor_less);
          heap.back() = candidate;
          std::push_heap(heap.begin(), heap.end(), neighbor_less);
        }
      }
      return;
    }
    const auto dim = static_cast<std::size_t>(node.split_dim);
    const double cut = q[dim] - node.split_value;
    const std::uint32_t near = cut < 0.0 ? node.left : node.right;
    const std::uint32_t far = cut < 0.0 ? node.right : node.left;
    search_knn(near, q, lower_bound, offsets, k, heap);
    const double saved = offsets[dim];
    const double far_bound = lower_bound - saved * saved + cut * cut;
    const double worst = heap.size() < k ? std::numeric_limits<double>::infinity()
                                         : heap.front().squared_distance;
    if (far_bound * kBoundSlack <= worst) {
      offsets[dim] = cut;
      search_knn(far, q, far_bound, offsets, k, heap);
      offsets[dim] = saved;
    }
  }

  std::size_t leaf_size_ = 16;
  std::vector<double> data_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace frame
