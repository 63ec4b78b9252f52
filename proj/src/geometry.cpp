#include "edgereg/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "edgereg/errors.hpp"

namespace edgereg {

Pose::Pose(const Eigen::Quaterniond& q, const Vec3& t) : rotation(q.normalized()), translation(t) {}

Pose::Pose(const Mat3& r, const Vec3& t) : rotation(Eigen::Quaterniond(r).normalized()), translation(t) {}

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.conjugate();
  out.translation = -(out.rotation * translation);
  return out;
}

Pose Pose::operator*(const Pose& other) const {
  Pose out;
  out.rotation = (rotation * other.rotation).normalized();
  out.translation = rotation * other.translation + translation;
  return out;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Mat3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(phi);
  return Eigen::AngleAxisd(theta, phi / theta).toRotationMatrix();
}

Vec3 so3_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  if (angle > std::numbers::pi) {
    angle = 2.0 * std::numbers::pi - angle;
    axis = -axis;
  }
  return axis * angle;
}

namespace {

// V(phi) = I + (1 - cos t)/t^2 K + (t - sin t)/t^3 K^2
Mat3 left_jacobian(const Vec3& phi) {
  const double t = phi.norm();
  const Mat3 k = skew(phi);
  if (t < 1e-6) return Mat3::Identity() + 0.5 * k + k * k / 6.0;
  const double t2 = t * t;
  return Mat3::Identity() + (1.0 - std::cos(t)) / t2 * k + (t - std::sin(t)) / (t2 * t) * k * k;
}

}  // namespace

Pose se3_exp(const Twist& xi) {
  const double theta = xi.phi.norm();
  if (!(theta < std::numbers::pi)) {
    throw InvalidArgument("se3_exp: rotation magnitude must be < pi, got " + std::to_string(theta));
  }
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  if (theta > 0.0) q = Eigen::Quaterniond(Eigen::AngleAxisd(theta, xi.phi / theta));
  return Pose(q, left_jacobian(xi.phi) * xi.rho);
}

Twist se3_log(const Pose& pose) {
  const Vec3 phi = so3_log(pose.rotation_matrix());
  const Vec3 rho = left_jacobian(phi).inverse() * pose.translation;
  return {rho, phi};
}

double rotation_angle_between(const Pose& a, const Pose& b) {
  return a.rotation.angularDistance(b.rotation);
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("intrinsics: fx, fy must be > 0");
  if (width <= 0 || height <= 0) throw InvalidArgument("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InvalidArgument("intrinsics: principal point outside image");
  }
}

std::optional<PixelPoint> try_project(const CameraIntrinsics& intr, const Vec3& p_cam,
                                      double epsilon_z) {
  if (!(p_cam.z() > epsilon_z)) return std::nullopt;
  const double x = p_cam.x() / p_cam.z();
  const double y = p_cam.y() / p_cam.z();
  double xd = x;
  double yd = y;
  if (intr.has_distortion()) {
    const double r2 = x * x + y * y;
    const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
    xd = x * radial + 2.0 * intr.p1 * x * y + intr.p2 * (r2 + 2.0 * x * x);
    yd = y * radial + intr.p1 * (r2 + 2.0 * y * y) + 2.0 * intr.p2 * x * y;
  }
  return PixelPoint(intr.fx * xd + intr.cx, intr.fy * yd + intr.cy);
}

PixelPoint project(const CameraIntrinsics& intr, const Vec3& p_cam, double epsilon_z) {
  auto px = try_project(intr, p_cam, epsilon_z);
  if (!px) throw BehindCamera("project: point at z=" + std::to_string(p_cam.z()) + " is behind the camera");
  return *px;
}

Eigen::Matrix<double, 2, 3> project_jacobian(const CameraIntrinsics& intr, const Vec3& p_cam) {
  const double iz = 1.0 / p_cam.z();
  const double x = p_cam.x() * iz;
  const double y = p_cam.y() * iz;

  // d(x,y)/d(X,Y,Z)
  Eigen::Matrix<double, 2, 3> dn;
  dn << iz, 0.0, -x * iz, 0.0, iz, -y * iz;

  Eigen::Matrix2d dd = Eigen::Matrix2d::Identity();
  if (intr.has_distortion()) {
    const double r2 = x * x + y * y;
    const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
    const double dradial = intr.k1 + 2.0 * intr.k2 * r2;  // d radial / d r2
    dd(0, 0) = radial + x * dradial * 2.0 * x + 2.0 * intr.p1 * y + intr.p2 * 6.0 * x;
    dd(0, 1) = x * dradial * 2.0 * y + 2.0 * intr.p1 * x + intr.p2 * 2.0 * y;
    dd(1, 0) = y * dradial * 2.0 * x + intr.p1 * 2.0 * x + 2.0 * intr.p2 * y;
    dd(1, 1) = radial + y * dradial * 2.0 * y + intr.p1 * 6.0 * y + 2.0 * intr.p2 * x;
  }
  Eigen::Matrix2d df = Eigen::Matrix2d::Zero();
  df(0, 0) = intr.fx;
  df(1, 1) = intr.fy;
  return df * dd * dn;
}

Eigen::Matrix<double, 3, 6> point_twist_jacobian(const Vec3& p_cam) {
  Eigen::Matrix<double, 3, 6> j;
  j.leftCols<3>().setIdentity();
  j.rightCols<3>() = -skew(p_cam);
  return j;
}

Eigen::Matrix<double, 2, 6> projection_twist_jacobian(const CameraIntrinsics& intr,
                                                      const Pose& pose, const Vec3& p_world) {
  const Vec3 pc = pose.apply(p_world);
  return project_jacobian(intr, pc) * point_twist_jacobian(pc);
}

Pose retract(const Pose& pose, const Vec6& xi) { return se3_exp(Twist(xi)) * pose; }

}  // namespace edgereg
