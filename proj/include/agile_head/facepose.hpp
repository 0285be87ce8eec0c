#pragma once

#include "agile_head/geometry.hpp"
#include "agile_head/landmarks.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace agile_head {

/// Which mesh vertices the estimators read. Defaults follow the 468-point
/// face-mesh topology: eye centres are the means of the eye contour rings,
/// the nose vector runs from the tip (1) to the bridge top (168).
struct LandmarkIndexSets {
    std::vector<int> left_eye{263, 249, 390, 373, 374, 380, 381, 382,
                              362, 398, 384, 385, 386, 387, 388, 466};
    std::vector<int> right_eye{33, 7, 163, 144, 145, 153, 154, 155,
                               133, 173, 157, 158, 159, 160, 161, 246};
    int nose_top = 168;
    int nose_lower = 1;
    std::vector<int> left_eyelid{263, 249, 390, 373, 374, 380, 381, 382,
                                 362, 398, 384, 385, 386, 387, 388, 466};
    std::vector<int> right_eyelid{33, 7, 163, 144, 145, 153, 154, 155,
                                  133, 173, 157, 158, 159, 160, 161, 246};
};

/// Raw nose-vector angle of the canonical neutral mesh, -atan(2).
inline constexpr double kDefaultPitchOffset = -1.1071487177940904;

/// Face angles in radians, each in (-pi/2, pi/2).
struct FaceAngles {
    double roll = 0.0;   // about the camera axis
    double yaw = 0.0;    // about the vertical axis
    double pitch = 0.0;  // about the horizontal axis, positive chin-up
};

double estimate_roll(const LandmarkFrame& f, const LandmarkIndexSets& idx = {});
double estimate_yaw(const LandmarkFrame& f, const LandmarkIndexSets& idx = {});

/// Pitch from the nose vector with the neutral-pose bias removed, folded back
/// into [-pi/2, pi/2).
double estimate_pitch(const LandmarkFrame& f, const LandmarkIndexSets& idx = {},
                      double offset = kDefaultPitchOffset);

FaceAngles estimate_angles(const LandmarkFrame& f, const LandmarkIndexSets& idx = {},
                           double pitch_offset = kDefaultPitchOffset);

/// Shoelace area of a simple polygon given in order (either orientation).
/// Throws ErrorCode::TooFewPoints for fewer than three vertices.
double polygon_area(std::span<const Eigen::Vector2d> polygon);

struct EyelidCalibration {
    double area_min = 0.014;  // eye area / interocular distance^2 when closed
    double area_max = 0.056;  // ... when fully open
};

/// Linear map of the eye area into [0, 1]. Throws ErrorCode::BadCalibration
/// unless area_max > area_min >= 0.
double eyelid_openness(double area, const EyelidCalibration& cal);

/// Mean eyelid-polygon area of both eyes divided by the squared distance
/// between the eye centres (scale-free).
double eye_area_ratio(const LandmarkFrame& f, const LandmarkIndexSets& idx = {});

struct EyeMapping {
    double pan_max = deg2rad(30.0);
    double tilt_max = deg2rad(20.0);
    EyelidCalibration eyelid;
};

struct EyeCommand {
    double pan = 0.0;   // rad
    double tilt = 0.0;  // rad
    double lid = 1.0;   // openness in [0, 1]
};

/// Points the 2-DOF eye towards the face position in the frame.
EyeCommand eye_command(const LandmarkFrame& f, const EyeMapping& cfg,
                       const LandmarkIndexSets& idx = {});

}  // namespace agile_head
