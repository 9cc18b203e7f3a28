#include "portalvr/math.hpp"

#include <algorithm>
#include <cmath>

namespace portalvr {

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
    if (!rotation.allFinite() || !translation.allFinite()) {
        throw std::invalid_argument("rigid transform has non-finite entries");
    }
    if (orthonormality_error() > 1e-6) {
        throw std::invalid_argument("rotation block is not orthonormal with det +1");
    }
}

RigidTransform RigidTransform::translation_only(const Vec3& t) {
    return RigidTransform(Unchecked{}, Mat3::Identity(), t);
}

RigidTransform RigidTransform::rotation_about_y(double radians) {
    const Mat3 r = Eigen::AngleAxisd(radians, Vec3::UnitY()).toRotationMatrix();
    return RigidTransform(Unchecked{}, r, Vec3::Zero());
}

RigidTransform RigidTransform::from_rotation(const Quat& q, const Vec3& t) {
    return RigidTransform(q.normalized().toRotationMatrix(), t);
}

Mat4 RigidTransform::matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
}

RigidTransform RigidTransform::inverse() const {
    const Mat3 rt = rotation_.transpose();
    return RigidTransform(Unchecked{}, rt, -(rt * translation_));
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
    return RigidTransform(Unchecked{}, rotation_ * rhs.rotation_,
                          rotation_ * rhs.translation_ + translation_);
}

double RigidTransform::orthonormality_error() const {
    const Mat3 gram = rotation_.transpose() * rotation_;
    const double ortho = (gram - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho + std::abs(rotation_.determinant() - 1.0);
}

Pose Pose::from_transform(const RigidTransform& t) {
    Pose p;
    p.position = t.translation();
    p.orientation = Quat(t.rotation()).normalized();
    return p;
}

RigidTransform Pose::to_transform() const {
    return RigidTransform::from_rotation(orientation, position);
}

void check_normalized(const Pose& pose) {
    if (std::abs(pose.orientation.norm() - 1.0) > 1e-6) {
        throw std::invalid_argument("pose orientation is not a unit quaternion");
    }
}

Pose transform_pose(const RigidTransform& t, const Pose& pose) {
    Pose out;
    out.position = t.apply_point(pose.position);
    out.orientation = (Quat(t.rotation()) * pose.orientation).normalized();
    return out;
}

Quat quat_from_ypr_degrees(double yaw, double pitch, double roll) {
    const Quat q = Eigen::AngleAxisd(deg_to_rad(yaw), Vec3::UnitY()) *
                   Eigen::AngleAxisd(deg_to_rad(pitch), Vec3::UnitX()) *
                   Eigen::AngleAxisd(deg_to_rad(roll), Vec3::UnitZ());
    return q.normalized();
}

Vec3 ypr_degrees_from_quat(const Quat& q) {
    // R = Ry(yaw) Rx(pitch) Rz(roll)
    const Mat3 r = q.normalized().toRotationMatrix();
    const double pitch = std::asin(std::clamp(-r(1, 2), -1.0, 1.0));
    double yaw = 0.0;
    double roll = 0.0;
    if (std::abs(std::cos(pitch)) > 1e-9) {
        yaw = std::atan2(r(0, 2), r(2, 2));
        roll = std::atan2(r(1, 0), r(1, 1));
    } else {
        yaw = std::atan2(-r(2, 0), r(0, 0));
    }
    return {rad_to_deg(yaw), rad_to_deg(pitch), rad_to_deg(roll)};
}

double angular_distance(const Quat& a, const Quat& b) {
    return a.normalized().angularDistance(b.normalized());
}

Plane Plane::through_point(const Vec3& normal, const Vec3& point) {
    Plane p;
    p.normal = normal.normalized();
    p.offset = -p.normal.dot(point);
    return p;
}

Plane Plane::transformed(const RigidTransform& t) const {
    const Vec3 n = t.apply_vector(normal);
    const Vec3 point_on = t.apply_point(-offset * normal);
    return through_point(n, point_on);
}

}  // namespace portalvr
