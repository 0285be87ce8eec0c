#pragma once

#include <Eigen/Dense>

#include <array>
#include <numbers>

namespace agile_head {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Wraps an angle into (-pi, pi].
double wrap_angle(double rad);

/// Head orientation in radians. Roll turns about the head's e2 axis,
/// pitch about e3 and yaw about e1.
struct HeadPose {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;

    bool operator==(const HeadPose&) const = default;
};

/// Intrinsic Z-Y-X Euler angles: R = Rz(phi) * Ry(theta) * Rx(psi).
struct EulerZYX {
    double phi = 0.0;
    double theta = 0.0;
    double psi = 0.0;

    bool operator==(const EulerZYX&) const = default;
};

/// Cross-product (skew-symmetric) matrix: cpm(v) * w == v.cross(w).
Mat3 cpm(const Vec3& v);

/// Rotation by `angle` about the unit axis `axis`:
///   Q = e e^T + (I - e e^T) cos a + cpm(e) sin a
/// Throws ErrorCode::NonUnitAxis when |axis| differs from 1 by more than 1e-9.
Mat3 axis_angle(const Vec3& axis, double angle);

struct HeadAxes {
    Vec3 yaw;    // e1
    Vec3 roll;   // e2
    Vec3 pitch;  // e3
};

/// The head rotation axes expressed in the robot base frame.
const HeadAxes& head_axes();

/// Q = Q(e1, yaw) * Q(e2, roll) * Q(e3, pitch).
Mat3 compose_head_rotation(double yaw, double roll, double pitch);
Mat3 compose_head_rotation(const HeadPose& pose);

/// Inverse of compose_head_rotation. Throws GimbalLock when the middle (roll)
/// factor sits at +-90 degrees.
HeadPose decompose_head_rotation(const Mat3& q);

Mat3 euler_to_matrix(const EulerZYX& e);

/// Throws ErrorCode::GimbalLock when |Q(2,0)| >= 1 - 1e-9.
EulerZYX matrix_to_euler(const Mat3& q);

/// Max |Q^T Q - I| entry and |det Q - 1|, useful for SO(3) membership checks.
double orthonormality_error(const Mat3& q);

}  // namespace agile_head
