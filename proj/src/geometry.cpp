#include "agile_head/geometry.hpp"

#include "agile_head/error.hpp"

#include <cmath>

namespace agile_head {

namespace {

constexpr double kUnitTolerance = 1e-9;
constexpr double kGimbalTolerance = 1e-9;

Mat3 axes_basis()
{
    const HeadAxes& e = head_axes();
    Mat3 b;
    b.col(0) = e.yaw;
    b.col(1) = e.roll;
    b.col(2) = e.pitch;
    return b;
}

}  // namespace

double wrap_angle(double rad)
{
    double w = std::remainder(rad, 2.0 * std::numbers::pi);
    if (w <= -std::numbers::pi) {
        w += 2.0 * std::numbers::pi;
    }
    return w;
}

Mat3 cpm(const Vec3& v)
{
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return m;
}

Mat3 axis_angle(const Vec3& axis, double angle)
{
    const double norm = axis.norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitTolerance) {
        throw Error(ErrorCode::NonUnitAxis, "rotation axis norm is " + std::to_string(norm));
    }
    const Mat3 outer = axis * axis.transpose();
    return outer + (Mat3::Identity() - outer) * std::cos(angle) + cpm(axis) * std::sin(angle);
}

const HeadAxes& head_axes()
{
    static const HeadAxes axes = [] {
        const double s3 = std::sqrt(3.0);
        const double s2 = std::sqrt(2.0);
        HeadAxes a;
        a.yaw = Vec3(-1.0, -1.0, -1.0) / s3;
        a.roll = (s2 / s3) * Vec3(-1.0, 0.5, 0.5);
        a.pitch = (s2 / 3.0) * Vec3(0.0, 1.5, -1.5);
        return a;
    }();
    return axes;
}

Mat3 compose_head_rotation(double yaw, double roll, double pitch)
{
    const HeadAxes& e = head_axes();
    return axis_angle(e.yaw, yaw) * axis_angle(e.roll, roll) * axis_angle(e.pitch, pitch);
}

Mat3 compose_head_rotation(const HeadPose& pose)
{
    return compose_head_rotation(pose.yaw, pose.roll, pose.pitch);
}

HeadPose decompose_head_rotation(const Mat3& q)
{
    // The axis triad is a proper rotation B, so Q(e_i, a) = B R_i(a) B^T and
    // B^T Q B = Rx(yaw) Ry(roll) Rz(pitch).
    const Mat3 b = axes_basis();
    const Mat3 m = b.transpose() * q * b;
    if (std::abs(m(0, 2)) >= 1.0 - kGimbalTolerance) {
        throw Error(ErrorCode::GimbalLock, "head roll at +-90 degrees");
    }
    HeadPose p;
    p.roll = std::asin(m(0, 2));
    p.yaw = std::atan2(-m(1, 2), m(2, 2));
    p.pitch = std::atan2(-m(0, 1), m(0, 0));
    return p;
}

Mat3 euler_to_matrix(const EulerZYX& e)
{
    return (Eigen::AngleAxisd(e.phi, Vec3::UnitZ()) *
            Eigen::AngleAxisd(e.theta, Vec3::UnitY()) *
            Eigen::AngleAxisd(e.psi, Vec3::UnitX()))
        .toRotationMatrix();
}

EulerZYX matrix_to_euler(const Mat3& q)
{
    if (std::abs(q(2, 0)) >= 1.0 - kGimbalTolerance) {
        throw Error(ErrorCode::GimbalLock, "theta at +-90 degrees");
    }
    EulerZYX e;
    e.theta = -std::asin(q(2, 0));
    e.psi = std::atan2(q(2, 1), q(2, 2));
    e.phi = std::atan2(q(1, 0), q(0, 0));
    return e;
}

double orthonormality_error(const Mat3& q)
{
    const double ortho = (q.transpose() * q - Mat3::Identity()).cwiseAbs().maxCoeff();
    return std::max(ortho, std::abs(q.determinant() - 1.0));
}

}  // namespace agile_head
