#include "frame/registration.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace frame {

namespace {

using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Vector6 = Eigen::Matrix<double, 6, 1>;

constexpr int kMaxHalvings = 8;
constexpr int kMaxStagnantIterations = 5;

Matrix3 skew(const Point3& v) {
  Matrix3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

/// Exponential map of se(3) with twist ordered (rotation, translation).
Transform se3_exp(const Vector6& xi) {
  const Point3 omega = xi.head<3>();
  const Point3 v = xi.tail<3>();
  const double theta = omega.norm();
  const Matrix3 w = skew(omega);
  Matrix3 r;
  Matrix3 jac;
  if (theta < 1e-9) {
    r = Matrix3::Identity() + w + 0.5 * w * w;
    jac = Matrix3::Identity() + 0.5 * w + (1.0 / 6.0) * w * w;
  } else {
    r = Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
    const double t2 = theta * theta;
    jac = Matrix3::Identity() + (1.0 - std::cos(theta)) / t2 * w +
          (theta - std::sin(theta)) / (t2 * theta) * w * w;
  }
  return Transform(project_to_rotation(r), jac * v);
}

struct LinearSystem {
  Matrix6 hessian = Matrix6::Zero();
  Vector6 gradient = Vector6::Zero();
  double cost = 0.0;
};

LinearSystem add(const LinearSystem& a, const LinearSystem& b) {
  return {a.hessian + b.hessian, a.gradient + b.gradient, a.cost + b.cost};
}

Matrix3 mahalanobis(const CovariantCloud& source, const CovariantCloud& target, std::size_t i,
                    std::size_t j, const Matrix3& r) {
  const Matrix3 combined =
      target.covariances[j] + r * source.covariances[i] * r.transpose();
  return combined.inverse();
}

LinearSystem build_system(const CovariantCloud& source, const CovariantCloud& target,
                          const std::vector<std::int64_t>& corr, const Transform& pose,
                          Execution exec) {
  const Matrix3& r = pose.rotation();
  return block_reduce(
      corr.size(), exec, LinearSystem{},
      [&](std::size_t begin, std::size_t end) {
        LinearSystem sys;
        for (std::size_t i = begin; i < end; ++i) {
          if (corr[i] < 0) continue;
          const auto j = static_cast<std::size_t>(corr[i]);
          const Point3 q = pose * source.points[i];
          const Point3 d = target.points[j] - q;
          const Matrix3 m = mahalanobis(source, target, i, j, r);
          // d(xi) = d + [q]x * omega - v for a left perturbation exp(xi) * pose.
          Eigen::Matrix<double, 3, 6> jac;
          jac.leftCols<3>() = skew(q);
          jac.rightCols<3>() = -Matrix3::Identity();
          const Eigen::Matrix<double, 6, 3> jtm = jac.transpose() * m;
          sys.hessian += jtm * jac;
          sys.gradient += jtm * d;
          sys.cost += d.dot(m * d);
        }
        return sys;
      },
      add);
}

Vector6 solve_step(const LinearSystem& sys) {
  Eigen::LDLT<Matrix6> ldlt(sys.hessian);
  Vector6 step = ldlt.solve(-sys.gradient);
  if (ldlt.info() == Eigen::Success && step.allFinite()) return step;
  const double damping = std::max(1e-12, 1e-9 * sys.hessian.trace());
  step = (sys.hessian + damping * Matrix6::Identity()).ldlt().solve(-sys.gradient);
  return step.allFinite() ? step : Vector6::Zero();
}

}  // namespace

std::size_t CovariantCloud::usable() const {
  return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 0));
}

void RegistrationParams::validate() const {
  if (!(max_correspondence_distance > 0.0)) throw Error("max_correspondence_distance must be > 0");
  if (max_iterations <= 0) throw Error("max_iterations must be > 0");
  if (!(translation_epsilon > 0.0) || !(rotation_epsilon > 0.0)) {
    throw Error("convergence epsilons must be > 0");
  }
  if (covariance_k < 3) throw Error("covariance_k must be >= 3");
  if (!(plane_regularization > 0.0)) throw Error("plane_regularization must be > 0");
  if (!(voxel_leaf >= 0.0)) throw Error("voxel_leaf must be >= 0");
  if (!(inlier_distance > 0.0)) throw Error("inlier_distance must be > 0");
  if (!(min_inlier_fraction >= 0.0) || min_inlier_fraction > 1.0) {
    throw Error("min_inlier_fraction must be in [0, 1]");
  }
}

PointCloud sample_sphere(const PointCloud& map, const SphereRegion& region) {
  if (!(region.radius > 0.0)) throw Error("sphere radius must be positive");
  const double r2 = region.radius * region.radius;
  PointCloud out;
  for (const auto& p : map.points) {
    if ((p - region.center).squaredNorm() <= r2) out.points.push_back(p);
  }
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double leaf) {
  if (leaf < 0.0) throw Error("voxel leaf must be >= 0");
  if (leaf == 0.0 || cloud.empty()) return cloud;

  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::vector<Key> keys(cloud.size());
  const double inv = 1.0 / leaf;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    keys[i] = {static_cast<std::int64_t>(std::floor(p.x() * inv)),
               static_cast<std::int64_t>(std::floor(p.y() * inv)),
               static_cast<std::int64_t>(std::floor(p.z() * inv))};
  }
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

  PointCloud out;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    Point3 sum = Point3::Zero();
    while (j < order.size() && keys[order[j]] == keys[order[i]]) {
      sum += cloud.points[order[j]];
      ++j;
    }
    out.points.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  return out;
}

KdTree<3> make_tree(const PointCloud& cloud) {
  std::vector<KdTree<3>::Point> pts(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    pts[i] = {cloud.points[i].x(), cloud.points[i].y(), cloud.points[i].z()};
  }
  return KdTree<3>(pts, 12);
}

CovariantCloud estimate_covariances(const PointCloud& cloud, int k, double regularization,
                                    Execution exec) {
  if (k < 3) throw Error("covariance neighborhood needs k >= 3");
  if (cloud.size() < static_cast<std::size_t>(k) + 1) {
    throw Error("covariance estimation needs at least k + 1 = " + std::to_string(k + 1) +
                " points, got " + std::to_string(cloud.size()));
  }
  const KdTree<3> tree = make_tree(cloud);
  CovariantCloud out;
  out.points = cloud;
  out.covariances.assign(cloud.size(), Matrix3::Identity());
  out.degenerate.assign(cloud.size(), 0);

  for_each_index(cloud.size(), exec, [&](std::size_t i) {
    const auto neighbors = tree.knn(cloud.points[i].data(), static_cast<std::size_t>(k));
    Point3 mean = Point3::Zero();
    for (const auto& nb : neighbors) mean += cloud.points[nb.index];
    mean /= static_cast<double>(neighbors.size());
    Matrix3 cov = Matrix3::Zero();
    for (const auto& nb : neighbors) {
      const Point3 d = cloud.points[nb.index] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(neighbors.size());

    Eigen::SelfAdjointEigenSolver<Matrix3> eig(cov);
    const Point3 values = eig.eigenvalues();  // ascending
    if (values(1) <= 1e-9 * std::max(1.0, values(2))) out.degenerate[i] = 1;
    const Matrix3& vecs = eig.eigenvectors();
    const Point3 rebuilt(regularization, 1.0, 1.0);
    out.covariances[i] = vecs * rebuilt.asDiagonal() * vecs.transpose();
  });
  return out;
}

CorrespondenceSearch::CorrespondenceSearch(const CovariantCloud& target) {
  PointCloud usable;
  for (std::size_t j = 0; j < target.size(); ++j) {
    if (target.degenerate[j]) continue;
    usable.points.push_back(target.points[j]);
    target_index_.push_back(j);
  }
  tree_ = make_tree(usable);
}

std::vector<std::int64_t> CorrespondenceSearch::find(const CovariantCloud& source,
                                                     const Transform& pose, double max_distance,
                                                     Execution exec) const {
  std::vector<std::int64_t> corr(source.size(), -1);
  if (tree_.empty()) return corr;
  const double max_sq = max_distance * max_distance;
  for_each_index(source.size(), exec, [&](std::size_t i) {
    if (source.degenerate[i]) return;
    const Point3 q = pose * source.points[i];
    const auto nb = tree_.nearest(q.data(), max_sq);
    if (nb) corr[i] = static_cast<std::int64_t>(target_index_[nb->index]);
  });
  return corr;
}

double gicp_cost(const CovariantCloud& source, const CovariantCloud& target,
                 const std::vector<std::int64_t>& corr, const Transform& pose, Execution exec) {
  const Matrix3& r = pose.rotation();
  return block_reduce(
      corr.size(), exec, 0.0,
      [&](std::size_t begin, std::size_t end) {
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
          if (corr[i] < 0) continue;
          const auto j = static_cast<std::size_t>(corr[i]);
          const Point3 d = target.points[j] - pose * source.points[i];
          sum += d.dot(mahalanobis(source, target, i, j, r) * d);
        }
        return sum;
      },
      [](double a, double b) { return a + b; });
}

double inlier_fraction(const PointCloud& source, const KdTree<3>& target_tree,
                       const Transform& pose, double distance) {
  if (source.empty() || target_tree.empty()) return 0.0;
  const double max_sq = distance * distance;
  std::vector<std::uint8_t> hit(source.size(), 0);
  for_each_index(source.size(), Execution::parallel, [&](std::size_t i) {
    const Point3 q = pose * source.points[i];
    hit[i] = target_tree.nearest(q.data(), max_sq).has_value() ? 1 : 0;
  });
  const auto count = std::count(hit.begin(), hit.end(), 1);
  return static_cast<double>(count) / static_cast<double>(source.size());
}

CovariantCloud prepare_for_registration(const PointCloud& cloud, const RegistrationParams& params,
                                        Execution exec) {
  params.validate();
  return estimate_covariances(voxel_downsample(cloud, params.voxel_leaf), params.covariance_k,
                              params.plane_regularization, exec);
}

RegistrationResult gicp_register(const CovariantCloud& source, const CovariantCloud& target,
                                 const Transform& initial, const RegistrationParams& params,
                                 Execution exec) {
  params.validate();
  if (source.size() == 0 || target.size() == 0) throw Error("registration input cloud is empty");
  if (source.covariances.size() != source.size() || target.covariances.size() != target.size()) {
    throw Error("covariance count does not match point count");
  }

  const CorrespondenceSearch search(target);
  RegistrationResult result;
  Transform pose = initial;
  int stagnant = 0;

  for (int iter = 1; iter <= params.max_iterations; ++iter) {
    result.iterations = iter;
    const auto corr = search.find(source, pose, params.max_correspondence_distance, exec);
    const auto count = static_cast<std::size_t>(
        std::count_if(corr.begin(), corr.end(), [](std::int64_t c) { return c >= 0; }));
    if (count == 0) {
      if (iter == 1) throw Error("initial guess outside capture range");
      break;
    }

    const LinearSystem sys = build_system(source, target, corr, pose, exec);
    const Vector6 step = solve_step(sys);

    double scale = 1.0;
    bool accepted = false;
    int halvings = 0;
    for (; halvings <= kMaxHalvings; ++halvings) {
      const Transform candidate = se3_exp(scale * step) * pose;
      const double cost = gicp_cost(source, target, corr, candidate, exec);
      if (cost <= sys.cost) {
        result.steps.push_back({sys.cost, cost, count, halvings});
        stagnant = cost < sys.cost ? 0 : stagnant + 1;
        pose = candidate;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }

    const double step_rotation = (accepted ? scale : 1.0) * step.head<3>().norm();
    const double step_translation = (accepted ? scale : 1.0) * step.tail<3>().norm();
    if (step_rotation < params.rotation_epsilon && step_translation < params.translation_epsilon) {
      result.converged = true;
      break;
    }
    if (!accepted) ++stagnant;
    if (stagnant >= kMaxStagnantIterations) break;
  }

  const auto final_corr = search.find(source, pose, params.max_correspondence_distance, exec);
  result.transform = pose;
  result.correspondence_count = static_cast<std::size_t>(
      std::count_if(final_corr.begin(), final_corr.end(), [](std::int64_t c) { return c >= 0; }));
  result.final_cost = gicp_cost(source, target, final_corr, pose, exec);
  result.inlier_fraction =
      inlier_fraction(source.points, make_tree(target.points), pose, params.inlier_distance);
  return result;
}

}  // namespace frame
