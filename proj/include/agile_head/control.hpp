#pragma once

#include "agile_head/geometry.hpp"
#include "agile_head/kinematics.hpp"

#include <array>
#include <cstdint>
#include <deque>

namespace agile_head {

struct PidGains {
    double kp = 8.0;
    double ki = 0.5;
    double kd = 0.05;
    double i_max = 0.5;  // clamp on the accumulated integral
};

struct PidState {
    double integral = 0.0;
    double prev_error = 0.0;
    bool primed = false;  // false until the first step has run
};

struct PidOutput {
    double command = 0.0;  // rad/s
    PidState state;
};

/// One PID update on the position error. The derivative uses the first
/// difference of the error; on the very first step it is zero.
/// Throws ErrorCode::DomainError when dt <= 0.
PidOutput pid_step(const PidGains& gains, const PidState& state, double setpoint,
                   double measured, double dt);

/// First-order velocity-lag servo with saturation.
struct ServoPlant {
    double position = 0.0;   // rad
    double velocity = 0.0;   // rad/s
    double v_limit = 5.24;   // rad/s
    double tau_m = 0.02;     // s
};

ServoPlant servo_step(const ServoPlant& plant, double command, double dt);

/// Three PID-driven servos, one per Agile Eye base joint. The command sent to
/// each servo is the planned joint velocity plus the PID correction.
class ServoBank {
public:
    ServoBank(const PidGains& gains, const ServoPlant& prototype);

    void step(const JointAngles& setpoint, const JointAngles& feedforward, double dt);

    JointAngles position() const;
    JointAngles velocity() const;
    const ServoPlant& servo(int i) const { return plants_[static_cast<std::size_t>(i)]; }
    const PidState& pid(int i) const { return pids_[static_cast<std::size_t>(i)]; }

private:
    PidGains gains_;
    std::array<PidState, 3> pids_{};
    std::array<ServoPlant, 3> plants_{};
};

struct SpeedGuardConfig {
    double max_head_speed = 1.57;  // rad/s
    int window = 3;                // frames
};

enum class GuardDecision { Accept, Hold };

struct StampedPose {
    std::int64_t stamp_us = 0;
    HeadPose pose;
};

/// Rejects head motion faster than the actuators should follow. The speed is
/// the largest per-axis |delta angle| / delta t between the new pose and the
/// oldest pose in the window.
class SpeedGuard {
public:
    explicit SpeedGuard(SpeedGuardConfig cfg = {});

    /// Throws ErrorCode::NonMonotonicTime unless stamps strictly increase.
    GuardDecision check(const StampedPose& next);

    /// Estimated speed of the last call to check(), rad/s.
    double last_speed() const { return last_speed_; }

    void reset() { history_.clear(); }

private:
    SpeedGuardConfig cfg_;
    std::deque<StampedPose> history_;
    double last_speed_ = 0.0;
};

/// Stateless variant over an explicit history (oldest first).
GuardDecision speed_guard(const std::deque<StampedPose>& history, const StampedPose& next,
                          const SpeedGuardConfig& cfg, double* speed_out = nullptr);

}  // namespace agile_head
