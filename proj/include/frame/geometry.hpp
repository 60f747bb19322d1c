#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace frame {

using Point3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool is_finite(const Point3& p);

/// Ordered set of 3D points in meters. Every point is finite.
struct PointCloud {
  std::vector<Point3> points;

  PointCloud() = default;
  explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }

  void append(const PointCloud& other);
  /// Throws frame::Error on the first non-finite point.
  void validate() const;
};

/// Rigid transform in SE(3). The rotation block is kept orthonormal with
/// determinant +1; the checked constructor rejects anything that is not.
class Transform {
 public:
  static constexpr double kOrthonormalTolerance = 1e-9;

  Transform() : rotation_(Matrix3::Identity()), translation_(Point3::Zero()) {}
  Transform(const Matrix3& rotation, const Point3& translation);

  static Transform identity() { return {}; }
  static Transform from_translation(const Point3& t);
  /// Right-handed rotation about +z followed by translation t.
  static Transform from_yaw_translation(double yaw, const Point3& t);
  static Transform from_matrix(const Eigen::Matrix4d& m);
  static Transform from_row_major(std::span<const double> values);

  const Matrix3& rotation() const { return rotation_; }
  const Point3& translation() const { return translation_; }

  Point3 operator*(const Point3& p) const { return rotation_ * p + translation_; }
  Transform operator*(const Transform& rhs) const;

  Transform inverse() const;
  Eigen::Matrix4d matrix() const;
  std::array<double, 16> row_major() const;

  /// Heading of the rotated x axis projected on the xy plane.
  double yaw() const;

 private:
  struct Unchecked {};
  Transform(const Matrix3& rotation, const Point3& translation, Unchecked)
      : rotation_(rotation), translation_(translation) {}

  friend Transform compose(const Transform& a, const Transform& b);

  Matrix3 rotation_;
  Point3 translation_;
};

/// Frobenius norm of R^T R - I.
double orthonormality_residual(const Matrix3& r);
bool is_rotation(const Matrix3& r, double tol = Transform::kOrthonormalTolerance);
/// Nearest rotation in the Frobenius sense (SVD projection).
Matrix3 project_to_rotation(const Matrix3& r);
Matrix3 yaw_rotation(double yaw);

/// a * b: applies b first, then a.
Transform compose(const Transform& a, const Transform& b);
PointCloud apply(const Transform& t, const PointCloud& cloud);

struct Pose {
  std::int64_t timestep = 0;
  Point3 position = Point3::Zero();
  double yaw = 0.0;
};

/// Timestamped robot positions; timesteps strictly increasing.
struct Trajectory {
  std::vector<Pose> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
  void validate() const;
  /// Sum of distances between consecutive positions.
  double length() const;
  const Pose* find(std::int64_t timestep) const;
};

struct ErrorPair {
  double translation_error = 0.0;  // meters
  double rotation_error = 0.0;     // degrees, geodesic
  double rotation_residual = 0.0;  // ||R_gt R^-1 - I||_F, diagnostic only
};

double translation_error(const Point3& t_gt, const Point3& t);
/// Geodesic angle between two rotations, in degrees. Rejects non-rotations.
double rotation_error(const Matrix3& r_gt, const Matrix3& r);
double rotation_residual(const Matrix3& r_gt, const Matrix3& r);
ErrorPair transform_error(const Transform& gt, const Transform& estimate);

constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double d) { return d * kPi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / kPi; }
/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace frame
