#pragma once

#include "frame/geometry.hpp"
#include "frame/kdtree.hpp"
#include "frame/parallel.hpp"

#include <cstdint>
#include <vector>

namespace frame {

struct SphereRegion {
  Point3 center = Point3::Zero();
  double radius = 10.0;
};

/// Points with ||m - center|| <= radius, in input order.
PointCloud sample_sphere(const PointCloud& map, const SphereRegion& region);

/// One centroid per occupied cubic cell of side `leaf`, ordered by cell key.
/// leaf == 0 returns the input unchanged.
PointCloud voxel_downsample(const PointCloud& cloud, double leaf);

/// Points with one plane-regularized covariance each. Points whose
/// neighborhood is rank deficient are flagged and never used as
/// correspondences.
struct CovariantCloud {
  PointCloud points;
  std::vector<Matrix3> covariances;
  std::vector<std::uint8_t> degenerate;

  std::size_t size() const { return points.size(); }
  std::size_t usable() const;
};

/// Covariance of each point's k nearest neighbors (the point included),
/// rebuilt with eigenvalues (1, 1, regularization) so that the normal
/// direction carries the small one. Needs at least k + 1 points and k >= 3.
CovariantCloud estimate_covariances(const PointCloud& cloud, int k, double regularization,
                                    Execution exec = Execution::parallel);

struct RegistrationParams {
  double max_correspondence_distance = 1.0;
  int max_iterations = 64;
  double translation_epsilon = 1e-4;
  double rotation_epsilon = 1e-4;
  int covariance_k = 20;
  double plane_regularization = 1e-3;
  double voxel_leaf = 0.25;
  /// A converged alignment must pair at least this fraction of the source
  /// points with a target point closer than inlier_distance; otherwise the
  /// result is treated as a failed capture.
  double min_inlier_fraction = 0.75;
  double inlier_distance = 0.3;

  void validate() const;
};

/// Cost of one accepted Gauss-Newton step, both evaluated on the
/// correspondence set of that iteration.
struct StepRecord {
  double cost_before = 0.0;
  double cost_after = 0.0;
  std::size_t correspondences = 0;
  int halvings = 0;
};

struct RegistrationResult {
  Transform transform;
  int iterations = 0;
  bool converged = false;
  double final_cost = 0.0;
  std::size_t correspondence_count = 0;
  double inlier_fraction = 0.0;
  std::vector<StepRecord> steps;
};

/// Nearest-neighbor lookup over the usable (non-degenerate) target points.
class CorrespondenceSearch {
 public:
  explicit CorrespondenceSearch(const CovariantCloud& target);

  /// One entry per source point: index of the nearest usable target point
  /// within max_distance of pose * source, or -1. Degenerate source points
  /// get -1.
  std::vector<std::int64_t> find(const CovariantCloud& source, const Transform& pose,
                                 double max_distance, Execution exec = Execution::parallel) const;

 private:
  KdTree<3> tree_;
  std::vector<std::size_t> target_index_;
};

/// Mahalanobis cost sum_i d_i^T (C_t + R C_s R^T)^-1 d_i for fixed
/// correspondences. Summed in fixed blocks so the value is independent of
/// the thread count.
double gicp_cost(const CovariantCloud& source, const CovariantCloud& target,
                 const std::vector<std::int64_t>& correspondences, const Transform& pose,
                 Execution exec = Execution::parallel);

/// Plane-to-plane GICP from `initial`. Returns a transform mapping source
/// coordinates into target coordinates. Throws frame::Error with
/// "initial guess outside capture range" when the initial guess yields no
/// correspondence at all.
RegistrationResult gicp_register(const CovariantCloud& source, const CovariantCloud& target,
                                 const Transform& initial, const RegistrationParams& params,
                                 Execution exec = Execution::parallel);

/// Voxel filter followed by covariance estimation, as used before gicp_register.
CovariantCloud prepare_for_registration(const PointCloud& cloud, const RegistrationParams& params,
                                        Execution exec = Execution::parallel);

/// Fraction of source points whose nearest target point under `pose` is
/// within `distance`.
double inlier_fraction(const PointCloud& source, const KdTree<3>& target_tree,
                       const Transform& pose, double distance);

KdTree<3> make_tree(const PointCloud& cloud);

}  // namespace frame
