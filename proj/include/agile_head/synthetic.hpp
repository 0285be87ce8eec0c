#pragma once

#include "agile_head/facepose.hpp"
#include "agile_head/landmarks.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace agile_head {

/// Canonical neutral face, 468 vertices in centimetres
/// (x toward the subject's left, y up, z toward the camera).
struct FaceMesh {
    std::vector<Vec3> vertices;
};

FaceMesh load_mesh(const std::filesystem::path& path);

/// Rotation that produces ground-truth face angles for the estimators:
/// Rz(-roll) * Ry(yaw) * Rx(-pitch) in mesh coordinates.
Mat3 face_rotation(const FaceAngles& a);

struct Camera {
    int width = 640;
    int height = 480;
    double focal = 16.0;         // pixels per centimetre (orthographic)
    Eigen::Vector2d centre{320.0, 240.0};  // pixel position of the mesh origin
};

/// Rotates the mesh and projects it orthographically into a landmark frame.
LandmarkFrame render_frame(const FaceMesh& mesh, const FaceAngles& angles, const Camera& cam,
                           std::int64_t stamp_us);

/// Scales the eyelid rings of both eyes vertically about their centres,
/// 1 = canonical open eye, 0 = closed slit.
FaceMesh with_eye_openness(const FaceMesh& mesh, double openness, const LandmarkIndexSets& idx = {});

/// Smooth head motion used for committed traces:
/// yaw 12 sin(2 pi 0.1 t), pitch 8 sin(2 pi 0.07 t + 0.5), roll 6 sin(2 pi 0.05 t + 1) degrees.
FaceAngles smooth_motion(double t_s);

/// Frames at `fps` following smooth_motion, starting at t = 0.
std::vector<LandmarkFrame> synth_smooth_trace(const FaceMesh& mesh, int frames, double fps,
                                              const Camera& cam = {});

/// Holds neutral for `hold_s` then jumps to `target` and stays there.
std::vector<LandmarkFrame> synth_step_trace(const FaceMesh& mesh, const FaceAngles& target,
                                            int frames, double fps, double hold_s,
                                            const Camera& cam = {});

}  // namespace agile_head
