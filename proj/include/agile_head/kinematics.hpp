#pragma once

#include "agile_head/geometry.hpp"

namespace agile_head {

/// Actuated base-joint angles of the Agile Eye in radians, measured from the
/// reference configuration.
struct JointAngles {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double theta3 = 0.0;

    double& operator[](int i) { return i == 0 ? theta1 : (i == 1 ? theta2 : theta3); }
    double operator[](int i) const { return i == 0 ? theta1 : (i == 1 ? theta2 : theta3); }

    bool operator==(const JointAngles&) const = default;
};

struct WorkspaceLimits {
    double max_roll = deg2rad(15.0);
    double max_pitch = deg2rad(15.0);
    double max_yaw = deg2rad(15.0);
};

/// Inverse kinematics. Throws ErrorCode::SingularPose when one of the
/// theta1/theta2 denominators vanishes.
JointAngles ikp(const EulerZYX& e);

struct FkpOptions {
    int max_iterations = 50;
    double tolerance = 1e-12;
    double fd_step = 1e-7;
};

/// Forward kinematics by damped Newton iteration on ikp(e) - q, starting at
/// `seed`. Throws ErrorCode::NoConvergence when the residual does not drop
/// below the tolerance within the iteration budget.
EulerZYX fkp(const JointAngles& q, const EulerZYX& seed = {}, const FkpOptions& opts = {});

HeadPose clamp_to_workspace(const HeadPose& p, const WorkspaceLimits& w);

bool within_workspace(const HeadPose& p, const WorkspaceLimits& w, double slack = 0.0);

/// Head pose -> joint angles, chaining the head-axis composition, the Z-Y-X
/// extraction and the IKP.
JointAngles head_to_joints(const HeadPose& p);

/// Joint angles -> head pose through fkp. `seed` carries the previous Euler
/// solution and is updated in place.
HeadPose joints_to_head(const JointAngles& q, EulerZYX& seed);

}  // namespace agile_head
