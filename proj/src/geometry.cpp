#include "frame/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace frame {

namespace {

constexpr double kDriftTolerance = 1e-12;

Matrix3 checked_rotation(const Matrix3& r) {
  if (!r.allFinite() || !is_rotation(r)) {
    throw Error("rotation is not orthonormal with determinant +1");
  }
  return r;
}

}  // namespace

bool is_finite(const Point3& p) { return p.allFinite(); }

void PointCloud::append(const PointCloud& other) {
  points.insert(points.end(), other.points.begin(), other.points.end());
}

void PointCloud::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!is_finite(points[i])) {
      throw Error("point " + std::to_string(i) + " is not finite");
    }
  }
}

double orthonormality_residual(const Matrix3& r) {
  return (r.transpose() * r - Matrix3::Identity()).norm();
}

bool is_rotation(const Matrix3& r, double tol) {
  return orthonormality_residual(r) <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Matrix3 project_to_rotation(const Matrix3& r) {
  Eigen::JacobiSVD<Matrix3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3 u = svd.matrixU();
  const Matrix3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

Matrix3 yaw_rotation(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Matrix3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Transform::Transform(const Matrix3& rotation, const Point3& translation)
    : rotation_(checked_rotation(rotation)), translation_(translation) {
  if (!translation.allFinite()) throw Error("translation is not finite");
}

Transform Transform::from_translation(const Point3& t) {
  return Transform(Matrix3::Identity(), t);
}

Transform Transform::from_yaw_translation(double yaw, const Point3& t) {
  if (!std::isfinite(yaw)) throw Error("yaw is not finite");
  return Transform(yaw_rotation(yaw), t);
}

Transform Transform::from_matrix(const Eigen::Matrix4d& m) {
  if (std::abs(m(3, 0)) > 0 || std::abs(m(3, 1)) > 0 || std::abs(m(3, 2)) > 0 ||
      m(3, 3) != 1.0) {
    throw Error("homogeneous matrix must have last row [0 0 0 1]");
  }
  return Transform(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

Transform Transform::from_row_major(std::span<const double> values) {
  if (values.size() != 16) throw Error("transform needs 16 row-major values");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = values[static_cast<std::size_t>(r * 4 + c)];
  }
  return from_matrix(m);
}

Transform Transform::operator*(const Transform& rhs) const { return compose(*this, rhs); }

Transform Transform::inverse() const {
  const Matrix3 rt = rotation_.transpose();
  return Transform(rt, -(rt * translation_), Unchecked{});
}

Eigen::Matrix4d Transform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

std::array<double, 16> Transform::row_major() const {
  const Eigen::Matrix4d m = matrix();
  std::array<double, 16> out{};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out[static_cast<std::size_t>(r * 4 + c)] = m(r, c);
  }
  return out;
}

double Transform::yaw() const { return std::atan2(rotation_(1, 0), rotation_(0, 0)); }

Transform compose(const Transform& a, const Transform& b) {
  Matrix3 r = a.rotation_ * b.rotation_;
  if (orthonormality_residual(r) > kDriftTolerance) r = project_to_rotation(r);
  return Transform(r, a.rotation_ * b.translation_ + a.translation_, Transform::Unchecked{});
}

PointCloud apply(const Transform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t * p);
  return out;
}

void Trajectory::validate() const {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (!is_finite(poses[i].position) || !std::isfinite(poses[i].yaw)) {
      throw Error("trajectory pose " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && poses[i].timestep <= poses[i - 1].timestep) {
      throw Error("trajectory timesteps must be strictly increasing");
    }
  }
}

double Trajectory::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    total += (poses[i].position - poses[i - 1].position).norm();
  }
  return total;
}

const Pose* Trajectory::find(std::int64_t timestep) const {
  auto it = std::lower_bound(poses.begin(), poses.end(), timestep,
                             [](const Pose& p, std::int64_t k) { return p.timestep < k; });
  if (it == poses.end() || it->timestep != timestep) return nullptr;
  return &*it;
}

double translation_error(const Point3& t_gt, const Point3& t) { return (t_gt - t).norm(); }

double rotation_error(const Matrix3& r_gt, const Matrix3& r) {
  checked_rotation(r_gt);
  checked_rotation(r);
  const Matrix3 delta = r_gt * r.transpose();
  // atan2 form stays accurate near 0 and 180 degrees where acos is ill-conditioned.
  const Point3 axis(delta(2, 1) - delta(1, 2), delta(0, 2) - delta(2, 0),
                    delta(1, 0) - delta(0, 1));
  const double sin_part = 0.5 * axis.norm();
  const double cos_part = 0.5 * (delta.trace() - 1.0);
  return rad2deg(std::atan2(sin_part, cos_part));
}

double rotation_residual(const Matrix3& r_gt, const Matrix3& r) {
  return (r_gt * r.transpose() - Matrix3::Identity()).norm();
}

ErrorPair transform_error(const Transform& gt, const Transform& estimate) {
  ErrorPair e;
  e.translation_error = translation_error(gt.translation(), estimate.translation());
  e.rotation_error = rotation_error(gt.rotation(), estimate.rotation());
  e.rotation_residual = rotation_residual(gt.rotation(), estimate.rotation());
  return e;
}

}  // namespace frame
