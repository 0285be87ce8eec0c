#include "agile_head/control.hpp"

#include "agile_head/error.hpp"

#include <algorithm>
#include <cmath>

namespace agile_head {

PidOutput pid_step(const PidGains& gains, const PidState& state, double setpoint,
                   double measured, double dt)
{
    if (!(dt > 0.0)) {
        throw Error(ErrorCode::DomainError, "PID step requires dt > 0");
    }
    const double error = setpoint - measured;

    PidOutput out;
    out.state.integral = std::clamp(state.integral + error * dt, -gains.i_max, gains.i_max);
    const double derivative = state.primed ? (error - state.prev_error) / dt : 0.0;
    out.state.prev_error = error;
    out.state.primed = true;
    out.command = gains.kp * error + gains.ki * out.state.integral + gains.kd * derivative;
    return out;
}

ServoPlant servo_step(const ServoPlant& plant, double command, double dt)
{
    ServoPlant next = plant;
    const double target = std::clamp(command, -plant.v_limit, plant.v_limit);
    const double alpha = plant.tau_m > 0.0 ? std::min(1.0, dt / plant.tau_m) : 1.0;
    next.velocity += (target - next.velocity) * alpha;
    next.position += next.velocity * dt;
    return next;
}

ServoBank::ServoBank(const PidGains& gains, const ServoPlant& prototype) : gains_(gains)
{
    plants_.fill(prototype);
}

void ServoBank::step(const JointAngles& setpoint, const JointAngles& feedforward, double dt)
{
    for (std::size_t i = 0; i < 3; ++i) {
        const int j = static_cast<int>(i);
        const PidOutput pid = pid_step(gains_, pids_[i], setpoint[j], plants_[i].position, dt);
        pids_[i] = pid.state;
        plants_[i] = servo_step(plants_[i], feedforward[j] + pid.command, dt);
    }
}

JointAngles ServoBank::position() const
{
    return {plants_[0].position, plants_[1].position, plants_[2].position};
}

JointAngles ServoBank::velocity() const
{
    return {plants_[0].velocity, plants_[1].velocity, plants_[2].velocity};
}

GuardDecision speed_guard(const std::deque<StampedPose>& history, const StampedPose& next,
                          const SpeedGuardConfig& cfg, double* speed_out)
{
    if (!history.empty() && next.stamp_us <= history.back().stamp_us) {
        throw Error(ErrorCode::NonMonotonicTime,
                    "stamp " + std::to_string(next.stamp_us) + " after " +
                        std::to_string(history.back().stamp_us));
    }
    double speed = 0.0;
    if (!history.empty()) {
        const StampedPose& oldest = history.front();
        const double dt = static_cast<double>(next.stamp_us - oldest.stamp_us) * 1e-6;
        const double delta = std::max({std::abs(next.pose.roll - oldest.pose.roll),
                                       std::abs(next.pose.pitch - oldest.pose.pitch),
                                       std::abs(next.pose.yaw - oldest.pose.yaw)});
        speed = delta / dt;
    }
    if (speed_out != nullptr) {
        *speed_out = speed;
    }
    return speed > cfg.max_head_speed ? GuardDecision::Hold : GuardDecision::Accept;
}

SpeedGuard::SpeedGuard(SpeedGuardConfig cfg) : cfg_(cfg)
{
    if (!(cfg_.max_head_speed > 0.0) || cfg_.window < 1) {
        throw Error(ErrorCode::ConfigError, "speed guard needs positive threshold and window");
    }
}

GuardDecision SpeedGuard::check(const StampedPose& next)
{
    const GuardDecision d = speed_guard(history_, next, cfg_, &last_speed_);
    history_.push_back(next);
    while (history_.size() > static_cast<std::size_t>(cfg_.window)) {
        history_.pop_front();
    }
    return d;
}

}  // namespace agile_head
