#include "agile_head/synthetic.hpp"

#include "agile_head/error.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace agile_head {

FaceMesh load_mesh(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open mesh " + path.string());
    }
    FaceMesh mesh;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& p : doc.at("points")) {
            mesh.vertices.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(),
                                       p.at(2).get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    if (mesh.vertices.size() != kLandmarkCount) {
        throw Error(ErrorCode::ParseError, path.string() + ": mesh must have 468 vertices");
    }
    return mesh;
}

Mat3 face_rotation(const FaceAngles& a)
{
    return (Eigen::AngleAxisd(-a.roll, Vec3::UnitZ()) * Eigen::AngleAxisd(a.yaw, Vec3::UnitY()) *
            Eigen::AngleAxisd(-a.pitch, Vec3::UnitX()))
        .toRotationMatrix();
}

LandmarkFrame render_frame(const FaceMesh& mesh, const FaceAngles& angles, const Camera& cam,
                           std::int64_t stamp_us)
{
    const Mat3 r = face_rotation(angles);
    LandmarkFrame f;
    f.stamp_us = stamp_us;
    f.width = cam.width;
    f.height = cam.height;
    f.points.reserve(mesh.vertices.size());
    const double w = cam.width;
    const double h = cam.height;
    for (const Vec3& v : mesh.vertices) {
        const Vec3 p = r * v;
        // Image y grows downward; depth grows away from the camera.
        const double u = cam.centre.x() + cam.focal * p.x();
        const double vv = cam.centre.y() - cam.focal * p.y();
        const double d = -cam.focal * p.z();
        f.points.emplace_back(u / w, vv / h, d / w);
    }
    return f;
}

FaceMesh with_eye_openness(const FaceMesh& mesh, double openness, const LandmarkIndexSets& idx)
{
    FaceMesh out = mesh;
    for (const auto* ring : {&idx.left_eyelid, &idx.right_eyelid}) {
        double cy = 0.0;
        for (int i : *ring) {
            cy += mesh.vertices[static_cast<std::size_t>(i)].y();
        }
        cy /= static_cast<double>(ring->size());
        for (int i : *ring) {
            auto& v = out.vertices[static_cast<std::size_t>(i)];
            v.y() = cy + (v.y() - cy) * openness;
        }
    }
    return out;
}

FaceAngles smooth_motion(double t_s)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    FaceAngles a;
    a.yaw = deg2rad(12.0 * std::sin(two_pi * 0.1 * t_s));
    a.pitch = deg2rad(8.0 * std::sin(two_pi * 0.07 * t_s + 0.5));
    a.roll = deg2rad(6.0 * std::sin(two_pi * 0.05 * t_s + 1.0));
    return a;
}

namespace {

std::int64_t frame_stamp(int k, double fps)
{
    return static_cast<std::int64_t>(std::llround(static_cast<double>(k) * 1e6 / fps));
}

}  // namespace

std::vector<LandmarkFrame> synth_smooth_trace(const FaceMesh& mesh, int frames, double fps,
                                              const Camera& cam)
{
    std::vector<LandmarkFrame> out;
    out.reserve(static_cast<std::size_t>(frames));
    for (int k = 0; k < frames; ++k) {
        const std::int64_t stamp = frame_stamp(k, fps);
        out.push_back(render_frame(mesh, smooth_motion(static_cast<double>(stamp) * 1e-6), cam, stamp));
    }
    return out;
}

std::vector<LandmarkFrame> synth_step_trace(const FaceMesh& mesh, const FaceAngles& target,
                                            int frames, double fps, double hold_s,
                                            const Camera& cam)
{
    std::vector<LandmarkFrame> out;
    out.reserve(static_cast<std::size_t>(frames));
    for (int k = 0; k < frames; ++k) {
        const std::int64_t stamp = frame_stamp(k, fps);
        const bool moved = static_cast<double>(stamp) * 1e-6 >= hold_s;
        out.push_back(render_frame(mesh, moved ? target : FaceAngles{}, cam, stamp));
    }
    return out;
}

}  // namespace agile_head
