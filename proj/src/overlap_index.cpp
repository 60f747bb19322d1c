#include "frame/overlap_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace frame {

namespace {

struct Candidate {
  double squared_distance = std::numeric_limits<double>::infinity();
  std::uint32_t own_timestep = 0;
  std::uint32_t incoming_timestep = 0;
  std::size_t own = 0;
  std::size_t incoming = 0;
  bool valid = false;
};

bool better(const Candidate& a, const Candidate& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  return std::tie(a.squared_distance, a.own_timestep, a.incoming_timestep, a.own, a.incoming) <
         std::tie(b.squared_distance, b.own_timestep, b.incoming_timestep, b.own, b.incoming);
}

std::vector<KdTree<kDescriptorSize>::Point> query_points(const std::vector<DescriptorRecord>& recs) {
  std::vector<KdTree<kDescriptorSize>::Point> pts;
  pts.reserve(recs.size());
  for (const auto& r : recs) pts.push_back(r.q.values);
  return pts;
}

Candidate best_for(const DescriptorIndex& index, std::span<const DescriptorRecord> incoming,
                   std::size_t j) {
  const auto hit = index.nearest(incoming[j].q);
  Candidate c;
  c.squared_distance = hit.squared_distance;
  c.own = hit.record;
  c.incoming = j;
  c.own_timestep = index.records()[hit.record].timestep;
  c.incoming_timestep = incoming[j].timestep;
  c.valid = true;
  return c;
}

constexpr std::ptrdiff_t kBlock = 128;

// Screens one block of incoming records against every own record using
// |a|^2 + |b|^2 - 2 a.b, which is off by at most slack from the difference
// form. Pairs that could still win are rescored with the difference form.
void scan_block(const DescriptorIndex& index, std::span<const DescriptorRecord> incoming,
                const DescriptorIndex::Columns& in_cols, const Eigen::VectorXd& in_norms, std::ptrdiff_t begin,
                double slack, Candidate& best) {
  const std::ptrdiff_t count = std::min<std::ptrdiff_t>(kBlock, in_cols.cols() - begin);
  const auto& own = index.columns();
  Eigen::MatrixXd approx = -2.0 * (own.transpose() * in_cols.middleCols(begin, count));
  approx.colwise() += index.squared_norms();
  approx.rowwise() += in_norms.segment(begin, count).transpose();

  const double block_min = approx.minCoeff();
  const auto& records = index.records();
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    const auto j = static_cast<std::size_t>(begin + c);
    for (std::ptrdiff_t r = 0; r < approx.rows(); ++r) {
      const double limit = best.valid ? std::min(best.squared_distance + slack, block_min + 2.0 * slack)
                                      : block_min + 2.0 * slack;
      if (approx(r, c) > limit) continue;
      const auto i = static_cast<std::size_t>(r);
      Candidate cand;
      cand.squared_distance = KdTree<kDescriptorSize>::squared_distance(
          records[i].q.values.data(), incoming[j].q.values.data(), std::numeric_limits<double>::infinity());
      cand.own = i;
      cand.incoming = j;
      cand.own_timestep = records[i].timestep;
      cand.incoming_timestep = incoming[j].timestep;
      cand.valid = true;
      if (better(cand, best)) best = cand;
    }
  }
}

OverlapMatch to_match(const DescriptorIndex& index, std::span<const DescriptorRecord> incoming,
                      const Candidate& c) {
  const auto& own = index.records()[c.own];
  const auto& in = incoming[c.incoming];
  return OverlapMatch{own.timestep, in.timestep, own.position, in.position,
                      std::sqrt(c.squared_distance)};
}

}  // namespace

DescriptorIndex::DescriptorIndex(std::vector<DescriptorRecord> records)
    : records_(std::move(records)) {
  if (records_.empty()) throw Error("cannot build a descriptor index from zero records");
  for (const auto& r : records_) {
    if (!is_finite(r.position)) throw Error("descriptor record position is not finite");
  }
  std::stable_sort(records_.begin(), records_.end(),
                   [](const DescriptorRecord& a, const DescriptorRecord& b) {
                     return a.timestep < b.timestep;
                   });
  for (const auto& r : records_) {
    if (!r.q.is_zero()) {
      all_zero_ = false;
      break;
    }
  }
  const auto pts = query_points(records_);
  tree_ = KdTree<kDescriptorSize>(pts, 8);
  columns_.resize(kDescriptorSize, static_cast<Eigen::Index>(records_.size()));
  for (std::size_t i = 0; i < records_.size(); ++i) {
    columns_.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::Matrix<double, kDescriptorSize, 1>>(records_[i].q.values.data());
  }
  squared_norms_ = columns_.colwise().squaredNorm().transpose();
}

DescriptorIndex::Hit DescriptorIndex::nearest(const QueryDescriptor& q) const {
  const auto nb = tree_.nearest(q.values);
  return Hit{nb->index, nb->squared_distance};
}

DescriptorIndex build_index(std::vector<DescriptorRecord> records) {
  return DescriptorIndex(std::move(records));
}

OverlapMatch query_best_pair(const DescriptorIndex& index,
                             std::span<const DescriptorRecord> incoming, Execution exec) {
  if (incoming.empty()) throw Error("no incoming descriptor records");
  const bool incoming_zero = std::all_of(incoming.begin(), incoming.end(),
                                         [](const DescriptorRecord& r) { return r.q.is_zero(); });
  if (incoming_zero && index.all_zero()) throw Error("no discriminative overlap");

  const auto n = static_cast<std::ptrdiff_t>(incoming.size());
  DescriptorIndex::Columns in_cols(kDescriptorSize, n);
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    in_cols.col(j) = Eigen::Map<const Eigen::Matrix<double, kDescriptorSize, 1>>(
        incoming[static_cast<std::size_t>(j)].q.values.data());
  }
  const Eigen::VectorXd in_norms = in_cols.colwise().squaredNorm().transpose();
  // Rounding in the expanded form stays far below this for 64 terms.
  const double slack = 1e-12 * (index.squared_norms().maxCoeff() + in_norms.maxCoeff()) +
                       std::numeric_limits<double>::denorm_min();

  const std::ptrdiff_t blocks = (n + kBlock - 1) / kBlock;
  Candidate best;
  if (exec == Execution::serial) {
    for (std::ptrdiff_t b = 0; b < blocks; ++b) scan_block(index, incoming, in_cols, in_norms, b * kBlock, slack, best);
  } else {
#pragma omp parallel
    {
      Candidate local;
#pragma omp for schedule(dynamic, 1) nowait
      for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        scan_block(index, incoming, in_cols, in_norms, b * kBlock, slack, local);
      }
      // The comparison is a strict total order, so the merge order is irrelevant.
#pragma omp critical(frame_best_pair)
      if (better(local, best)) best = local;
    }
  }
  return to_match(index, incoming, best);
}

std::vector<OverlapMatch> query_top_pairs(const DescriptorIndex& index,
                                          std::span<const DescriptorRecord> incoming,
                                          std::size_t k) {
  std::vector<Candidate> all;
  all.reserve(incoming.size());
  for (std::size_t j = 0; j < incoming.size(); ++j) all.push_back(best_for(index, incoming, j));
  std::sort(all.begin(), all.end(), better);
  if (all.size() > k) all.resize(k);
  std::vector<OverlapMatch> out;
  out.reserve(all.size());
  for (const auto& c : all) out.push_back(to_match(index, incoming, c));
  return out;
}

Transform initial_transform(const OverlapMatch& match, double yaw, InitialTransformForm form) {
  if (form == InitialTransformForm::raw) {
    return Transform::from_yaw_translation(yaw, match.own_position - match.incoming_position);
  }
  const Matrix3 r = yaw_rotation(yaw);
  return Transform(r, match.own_position - r * match.incoming_position);
}

}  // namespace frame
