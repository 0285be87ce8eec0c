#pragma once

#include "agile_head/kinematics.hpp"

#include <vector>

namespace agile_head {

/// 3-4-5 blend S(tau) = 6 tau^5 - 15 tau^4 + 10 tau^3 on [0, 1].
/// Throws ErrorCode::DomainError outside the unit interval.
double s345(double tau);
double s345_velocity(double tau);      // dS/dtau
double s345_acceleration(double tau);  // d2S/dtau2

struct TrajectorySample {
    double t = 0.0;
    JointAngles position;
    JointAngles velocity;
    JointAngles acceleration;
};

/// Joint-space move from `start` to `end` over `duration` seconds with zero
/// velocity and acceleration at both ends. Immutable once built.
class Trajectory345 {
public:
    Trajectory345() = default;
    Trajectory345(const JointAngles& start, const JointAngles& end, double duration);

    /// Holds at `q` forever.
    static Trajectory345 hold(const JointAngles& q);

    /// Evaluates at time t (seconds since the start); clamps to [0, T].
    TrajectorySample at(double t) const;

    const JointAngles& start() const { return start_; }
    const JointAngles& end() const { return end_; }
    double duration() const { return duration_; }

private:
    JointAngles start_;
    JointAngles end_;
    double duration_ = 0.0;
};

/// Samples a trajectory at t = k * dt, always ending with a sample at exactly T.
/// Throws ErrorCode::DomainError unless T >= dt > 0.
std::vector<TrajectorySample> plan(const JointAngles& q0, const JointAngles& q1, double duration,
                                   double dt);

struct TimingLaw {
    double v_max = deg2rad(90.0);  // rad/s
    double t_min = 0.05;           // s
};

/// T = max(t_min, max_i |q1_i - q0_i| / v_max).
double move_duration(const JointAngles& q0, const JointAngles& q1, const TimingLaw& law);

}  // namespace agile_head
