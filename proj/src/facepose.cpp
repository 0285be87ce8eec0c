#include "agile_head/facepose.hpp"

#include "agile_head/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace agile_head {

namespace {

constexpr double kMinEyeSeparation = 1e-6;
constexpr double kMinNoseDepth = 1e-9;

Vec3 mean_point(const LandmarkFrame& f, const std::vector<int>& idx)
{
    if (idx.empty()) {
        throw Error(ErrorCode::DegenerateGeometry, "empty landmark index set");
    }
    Vec3 sum = Vec3::Zero();
    for (int i : idx) {
        if (i < 0 || static_cast<std::size_t>(i) >= f.points.size()) {
            throw Error(ErrorCode::DegenerateGeometry, "landmark index out of range");
        }
        sum += f.pixel(static_cast<std::size_t>(i));
    }
    return sum / static_cast<double>(idx.size());
}

// Left-eye centre to right-eye centre, pixel-consistent units.
Vec3 eye_vector(const LandmarkFrame& f, const LandmarkIndexSets& idx)
{
    const Vec3 v = mean_point(f, idx.right_eye) - mean_point(f, idx.left_eye);
    if (std::abs(v.x()) < kMinEyeSeparation * f.width) {
        throw Error(ErrorCode::DegenerateGeometry, "eye centres coincide horizontally");
    }
    return v;
}

double fold_half_turn(double a)
{
    return a - std::numbers::pi * std::round(a / std::numbers::pi);
}

double polygon_area_of(const LandmarkFrame& f, const std::vector<int>& ring)
{
    std::vector<Eigen::Vector2d> poly;
    poly.reserve(ring.size());
    for (int i : ring) {
        if (i < 0 || static_cast<std::size_t>(i) >= f.points.size()) {
            throw Error(ErrorCode::DegenerateGeometry, "landmark index out of range");
        }
        const Vec3 p = f.pixel(static_cast<std::size_t>(i));
        poly.emplace_back(p.x(), p.y());
    }
    return polygon_area(poly);
}

}  // namespace

double estimate_roll(const LandmarkFrame& f, const LandmarkIndexSets& idx)
{
    const Vec3 v = eye_vector(f, idx);
    return std::atan(v.y() / v.x());
}

double estimate_yaw(const LandmarkFrame& f, const LandmarkIndexSets& idx)
{
    const Vec3 v = eye_vector(f, idx);
    return std::atan(v.z() / v.x());
}

double estimate_pitch(const LandmarkFrame& f, const LandmarkIndexSets& idx, double offset)
{
    const auto n = f.points.size();
    if (idx.nose_top < 0 || idx.nose_lower < 0 || static_cast<std::size_t>(idx.nose_top) >= n ||
        static_cast<std::size_t>(idx.nose_lower) >= n) {
        throw Error(ErrorCode::DegenerateGeometry, "nose landmark index out of range");
    }
    const Vec3 v = f.pixel(static_cast<std::size_t>(idx.nose_top)) -
                   f.pixel(static_cast<std::size_t>(idx.nose_lower));
    if (std::abs(v.z()) < kMinNoseDepth) {
        throw Error(ErrorCode::DegenerateGeometry, "nose vector has no depth component");
    }
    return fold_half_turn(std::atan(v.y() / v.z()) - offset);
}

FaceAngles estimate_angles(const LandmarkFrame& f, const LandmarkIndexSets& idx,
                           double pitch_offset)
{
    return {estimate_roll(f, idx), estimate_yaw(f, idx), estimate_pitch(f, idx, pitch_offset)};
}

double polygon_area(std::span<const Eigen::Vector2d> polygon)
{
    if (polygon.size() < 3) {
        throw Error(ErrorCode::TooFewPoints, "polygon needs at least 3 vertices");
    }
    double twice = 0.0;
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        const auto& a = polygon[i];
        const auto& b = polygon[(i + 1) % polygon.size()];
        twice += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * std::abs(twice);
}

double eyelid_openness(double area, const EyelidCalibration& cal)
{
    if (!(cal.area_max > cal.area_min) || cal.area_min < 0.0) {
        throw Error(ErrorCode::BadCalibration, "eyelid calibration needs max > min >= 0");
    }
    return std::clamp((area - cal.area_min) / (cal.area_max - cal.area_min), 0.0, 1.0);
}

double eye_area_ratio(const LandmarkFrame& f, const LandmarkIndexSets& idx)
{
    const double interocular = eye_vector(f, idx).head<2>().squaredNorm();
    const double area =
        0.5 * (polygon_area_of(f, idx.left_eyelid) + polygon_area_of(f, idx.right_eyelid));
    return area / interocular;
}

EyeCommand eye_command(const LandmarkFrame& f, const EyeMapping& cfg, const LandmarkIndexSets& idx)
{
    if (f.points.empty()) {
        throw Error(ErrorCode::DegenerateGeometry, "empty frame");
    }
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const Vec3& p : f.points) {
        centroid += p.head<2>();
    }
    centroid /= static_cast<double>(f.points.size());

    EyeCommand cmd;
    cmd.pan = std::clamp(cfg.pan_max * 2.0 * (0.5 - centroid.x()), -cfg.pan_max, cfg.pan_max);
    cmd.tilt = std::clamp(cfg.tilt_max * 2.0 * (0.5 - centroid.y()), -cfg.tilt_max, cfg.tilt_max);
    cmd.lid = eyelid_openness(eye_area_ratio(f, idx), cfg.eyelid);
    return cmd;
}

}  // namespace agile_head
