#pragma once

#include <Eigen/Geometry>

#include <stdexcept>

namespace portalvr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Rigid 4x4 homogeneous transform (rotation + translation, meters).
///
/// The public constructor validates that the rotation block is orthonormal
/// with determinant +1 (within 1e-6). Products and inverses of valid
/// transforms are produced without re-validation.
class RigidTransform {
public:
    RigidTransform() = default;
    RigidTransform(const Mat3& rotation, const Vec3& translation);

    static RigidTransform identity() { return {}; }
    static RigidTransform translation_only(const Vec3& t);
    static RigidTransform rotation_about_y(double radians);
    static RigidTransform from_rotation(const Quat& q, const Vec3& t);

    [[nodiscard]] Mat3 rotation() const { return rotation_; }
    [[nodiscard]] Vec3 translation() const { return translation_; }
    [[nodiscard]] Mat4 matrix() const;

    [[nodiscard]] Vec3 apply_point(const Vec3& p) const { return rotation_ * p + translation_; }
    [[nodiscard]] Vec3 apply_vector(const Vec3& v) const { return rotation_ * v; }

    [[nodiscard]] RigidTransform inverse() const;
    RigidTransform operator*(const RigidTransform& rhs) const;

    /// Max abs deviation of R^T R from identity, plus |det R - 1|.
    [[nodiscard]] double orthonormality_error() const;

private:
    struct Unchecked {};
    RigidTransform(Unchecked, const Mat3& r, const Vec3& t) : rotation_(r), translation_(t) {}

    Mat3 rotation_ = Mat3::Identity();
    Vec3 translation_ = Vec3::Zero();
};

/// Position plus unit-quaternion orientation.
struct Pose {
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();

    static Pose from_transform(const RigidTransform& t);
    [[nodiscard]] RigidTransform to_transform() const;
};

/// Throws std::invalid_argument when the orientation is not unit length within 1e-6.
void check_normalized(const Pose& pose);

/// Applies a rigid transform to both position and orientation.
Pose transform_pose(const RigidTransform& t, const Pose& pose);

/// Yaw about +Y, then pitch about local +X, then roll about local +Z (degrees).
Quat quat_from_ypr_degrees(double yaw, double pitch, double roll);
/// Inverse of quat_from_ypr_degrees for the principal branch.
Vec3 ypr_degrees_from_quat(const Quat& q);

/// Angle of the relative rotation between two orientations (radians).
double angular_distance(const Quat& a, const Quat& b);

/// Plane n.p + d = 0 with |n| = 1; "inside" is n.p + d >= 0.
struct Plane {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;

    static Plane through_point(const Vec3& normal, const Vec3& point);
    [[nodiscard]] double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
    [[nodiscard]] Plane transformed(const RigidTransform& t) const;
};

}  // namespace portalvr
