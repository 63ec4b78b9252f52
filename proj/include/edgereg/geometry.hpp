#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <optional>

namespace edgereg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using PixelPoint = Eigen::Vector2d;

/// Rigid transform mapping world-frame points into the camera frame:
/// p_cam = R * p_world + t.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Eigen::Quaterniond& q, const Vec3& t);
  Pose(const Mat3& r, const Vec3& t);

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
  Pose inverse() const;
  /// (a * b).apply(p) == a.apply(b.apply(p)); the result quaternion is renormalized.
  Pose operator*(const Pose& other) const;
  /// Camera centre in world coordinates when this pose is world->camera.
  Vec3 center() const { return -(rotation.conjugate() * translation); }
};

inline Vec3 se3_apply(const Pose& pose, const Vec3& p) { return pose.apply(p); }

/// Tangent vector of SE(3): translational part first.
struct Twist {
  Vec3 rho = Vec3::Zero();
  Vec3 phi = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& r, const Vec3& p) : rho(r), phi(p) {}
  explicit Twist(const Vec6& v) : rho(v.head<3>()), phi(v.tail<3>()) {}
  Vec6 vector() const {
    Vec6 v;
    v << rho, phi;
    return v;
  }
};

/// Exponential map; throws InvalidArgument when |phi| >= pi.
Pose se3_exp(const Twist& xi);
/// Logarithm, returns phi with |phi| <= pi.
Twist se3_log(const Pose& pose);

Mat3 so3_exp(const Vec3& phi);
Vec3 so3_log(const Mat3& r);
Mat3 skew(const Vec3& v);

/// Angle of the relative rotation between two poses, radians.
double rotation_angle_between(const Pose& a, const Pose& b);

/// Pinhole camera with Brown-Conrady radial-tangential distortion.
struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  double k1 = 0.0;
  double k2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  int width = 640;
  int height = 480;

  /// Throws InvalidArgument if fx, fy or the principal point are out of range.
  void validate() const;
  bool in_image(const PixelPoint& px) const {
    return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width && px.y() < height;
  }
  bool has_distortion() const { return k1 != 0.0 || k2 != 0.0 || p1 != 0.0 || p2 != 0.0; }
};

inline constexpr double kDefaultEpsilonZ = 1e-6;

/// Throws BehindCamera when p_cam.z <= epsilon_z.
PixelPoint project(const CameraIntrinsics& intr, const Vec3& p_cam,
                   double epsilon_z = kDefaultEpsilonZ);
std::optional<PixelPoint> try_project(const CameraIntrinsics& intr, const Vec3& p_cam,
                                      double epsilon_z = kDefaultEpsilonZ);

/// d(u,v)/d(p_cam), distortion included.
Eigen::Matrix<double, 2, 3> project_jacobian(const CameraIntrinsics& intr, const Vec3& p_cam);

/// d(p_cam)/d(xi) for the left perturbation exp(xi) * T applied to a camera-frame point.
Eigen::Matrix<double, 3, 6> point_twist_jacobian(const Vec3& p_cam);

/// Pixel = project(exp(xi) * pose, p_world); Jacobian w.r.t. xi at xi = 0.
Eigen::Matrix<double, 2, 6> projection_twist_jacobian(const CameraIntrinsics& intr,
                                                      const Pose& pose, const Vec3& p_world);

/// Left-multiplied twist update: exp(xi) * pose.
Pose retract(const Pose& pose, const Vec6& xi);

}  // namespace edgereg
