#include "agile_head/trajectory.hpp"

#include "agile_head/error.hpp"

#include <algorithm>
#include <cmath>

namespace agile_head {

namespace {

void check_tau(double tau)
{
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw Error(ErrorCode::DomainError, "tau outside [0, 1]: " + std::to_string(tau));
    }
}

}  // namespace

double s345(double tau)
{
    check_tau(tau);
    const double t3 = tau * tau * tau;
    return t3 * (10.0 + tau * (-15.0 + 6.0 * tau));
}

double s345_velocity(double tau)
{
    check_tau(tau);
    const double u = tau * (tau - 1.0);
    return 30.0 * u * u;
}

double s345_acceleration(double tau)
{
    check_tau(tau);
    return 60.0 * tau * (tau - 1.0) * (2.0 * tau - 1.0);
}

Trajectory345::Trajectory345(const JointAngles& start, const JointAngles& end, double duration)
    : start_(start), end_(end), duration_(duration)
{
    if (!(duration > 0.0) || !std::isfinite(duration)) {
        throw Error(ErrorCode::DomainError, "trajectory duration must be positive");
    }
}

Trajectory345 Trajectory345::hold(const JointAngles& q)
{
    Trajectory345 t;
    t.start_ = q;
    t.end_ = q;
    return t;
}

TrajectorySample Trajectory345::at(double t) const
{
    TrajectorySample out;
    out.t = t;
    if (duration_ <= 0.0 || t >= duration_) {
        out.position = end_;
        return out;
    }
    if (t <= 0.0) {
        out.position = start_;
        return out;
    }
    const double tau = t / duration_;
    const double s = s345(tau);
    const double ds = s345_velocity(tau) / duration_;
    const double dds = s345_acceleration(tau) / (duration_ * duration_);
    for (int i = 0; i < 3; ++i) {
        const double delta = end_[i] - start_[i];
        out.position[i] = start_[i] + delta * s;
        out.velocity[i] = delta * ds;
        out.acceleration[i] = delta * dds;
    }
    return out;
}

std::vector<TrajectorySample> plan(const JointAngles& q0, const JointAngles& q1, double duration,
                                   double dt)
{
    if (!(dt > 0.0) || !(duration >= dt)) {
        throw Error(ErrorCode::DomainError, "plan requires T >= dt > 0");
    }
    const Trajectory345 traj(q0, q1, duration);
    std::vector<TrajectorySample> out;
    const auto steps = static_cast<long>(std::floor(duration / dt + 1e-9));
    out.reserve(static_cast<std::size_t>(steps) + 2);
    for (long k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        if (t >= duration) {
            break;
        }
        out.push_back(traj.at(t));
    }
    out.push_back(traj.at(duration));
    out.front().position = q0;
    return out;
}

double move_duration(const JointAngles& q0, const JointAngles& q1, const TimingLaw& law)
{
    double span = 0.0;
    for (int i = 0; i < 3; ++i) {
        span = std::max(span, std::abs(q1[i] - q0[i]));
    }
    return std::max(law.t_min, span / law.v_max);
}

}  // namespace agile_head
