#include "agile_head/kinematics.hpp"

#include "agile_head/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace agile_head {

namespace {

constexpr double kSingularTolerance = 1e-12;
constexpr double kThetaLimit = std::numbers::pi / 2.0 - 1e-6;

using Vec = Eigen::Vector3d;

Vec to_vec(const EulerZYX& e) { return {e.phi, e.theta, e.psi}; }
EulerZYX to_euler(const Vec& v) { return {v(0), v(1), v(2)}; }

Vec residual(const EulerZYX& e, const JointAngles& target)
{
    const JointAngles q = ikp(e);
    return {wrap_angle(q.theta1 - target.theta1),
            wrap_angle(q.theta2 - target.theta2),
            wrap_angle(q.theta3 - target.theta3)};
}

// Keeps iterates on the non-singular Euler chart.
Vec project(Vec v)
{
    v(0) = wrap_angle(v(0));
    v(1) = std::clamp(v(1), -kThetaLimit, kThetaLimit);
    v(2) = wrap_angle(v(2));
    return v;
}

}  // namespace

JointAngles ikp(const EulerZYX& e)
{
    const double cphi = std::cos(e.phi), sphi = std::sin(e.phi);
    const double cth = std::cos(e.theta), sth = std::sin(e.theta);
    const double cpsi = std::cos(e.psi), spsi = std::sin(e.psi);

    const double num1 = cth * spsi;
    const double den1 = cphi * cpsi + sphi * sth * spsi;
    const double num2 = sphi * spsi + cphi * sth * cpsi;
    const double den2 = cth * cpsi;

    if (std::abs(den1) < kSingularTolerance || std::abs(den2) < kSingularTolerance) {
        throw Error(ErrorCode::SingularPose, "IKP denominator vanishes");
    }

    JointAngles q;
    q.theta1 = std::atan2(num1, den1);
    q.theta2 = std::atan2(num2, den2);
    q.theta3 = wrap_angle(e.phi);
    return q;
}

EulerZYX fkp(const JointAngles& q, const EulerZYX& seed, const FkpOptions& opts)
{
    Vec x = project(to_vec(seed));
    Vec r = residual(to_euler(x), q);
    double rnorm = r.cwiseAbs().maxCoeff();

    for (int it = 0; it < opts.max_iterations; ++it) {
        if (rnorm <= opts.tolerance) {
            return to_euler(x);
        }

        Eigen::Matrix3d jac;
        for (int j = 0; j < 3; ++j) {
            Vec hi = x, lo = x;
            hi(j) += opts.fd_step;
            lo(j) -= opts.fd_step;
            jac.col(j) = (residual(to_euler(hi), q) - residual(to_euler(lo), q)) / (2.0 * opts.fd_step);
        }

        Vec step = jac.fullPivLu().solve(-r);
        if (!step.allFinite()) {
            break;
        }

        // Halve the step while the residual grows.
        Vec next = project(x + step);
        Vec rnext = residual(to_euler(next), q);
        double nnext = rnext.cwiseAbs().maxCoeff();
        for (int halving = 0; halving < 30 && !(nnext < rnorm); ++halving) {
            step *= 0.5;
            next = project(x + step);
            rnext = residual(to_euler(next), q);
            nnext = rnext.cwiseAbs().maxCoeff();
        }
        if (!(nnext < rnorm)) {
            // Stalled at round-off level: accept if already good enough.
            if (rnorm <= 1e-8) {
                return to_euler(x);
            }
            break;
        }
        x = next;
        r = rnext;
        rnorm = nnext;
    }

    if (rnorm <= opts.tolerance) {
        return to_euler(x);
    }
    throw Error(ErrorCode::NoConvergence,
                "FKP residual " + std::to_string(rnorm) + " after " +
                    std::to_string(opts.max_iterations) + " iterations");
}

HeadPose clamp_to_workspace(const HeadPose& p, const WorkspaceLimits& w)
{
    return {std::clamp(p.roll, -w.max_roll, w.max_roll),
            std::clamp(p.pitch, -w.max_pitch, w.max_pitch),
            std::clamp(p.yaw, -w.max_yaw, w.max_yaw)};
}

bool within_workspace(const HeadPose& p, const WorkspaceLimits& w, double slack)
{
    return std::abs(p.roll) <= w.max_roll + slack &&
           std::abs(p.pitch) <= w.max_pitch + slack &&
           std::abs(p.yaw) <= w.max_yaw + slack;
}

JointAngles head_to_joints(const HeadPose& p)
{
    return ikp(matrix_to_euler(compose_head_rotation(p)));
}

HeadPose joints_to_head(const JointAngles& q, EulerZYX& seed)
{
    seed = fkp(q, seed);
    return decompose_head_rotation(euler_to_matrix(seed));
}

}  // namespace agile_head
