#include "agile_head/pipeline.hpp"

#include "agile_head/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

namespace agile_head {

// ---------------------------------------------------------------------------
// face_angles

FaceAnglesProcessor::FaceAnglesProcessor(const PipelineConfig& cfg) : cfg_(cfg)
{
    if (cfg_.method == PoseMethod::Regression) {
        horizontal_ = load_model(cfg_.horizontal_model);
        vertical_ = load_model(cfg_.vertical_model);
        if (horizontal_->axis != PoseAxis::Horizontal || vertical_->axis != PoseAxis::Vertical) {
            throw Error(ErrorCode::ConfigError, "model axis tags do not match their config slots");
        }
    }
}

FaceAnglesProcessor::Output FaceAnglesProcessor::process(const LandmarkFrame& f) const
{
    validate(f);
    Output out;
    out.angles.roll = estimate_roll(f, cfg_.landmarks);
    if (cfg_.method == PoseMethod::Geometry) {
        out.angles.yaw = estimate_yaw(f, cfg_.landmarks);
        out.angles.pitch = estimate_pitch(f, cfg_.landmarks, cfg_.pitch_offset);
    } else {
        out.angles.yaw = score_to_angle(predict(*horizontal_, f), cfg_.workspace.max_yaw);
        out.angles.pitch = score_to_angle(predict(*vertical_, f), cfg_.workspace.max_pitch);
    }
    out.eye = eye_command(f, cfg_.eye, cfg_.landmarks);
    return out;
}

nlohmann::ordered_json angles_payload(const FaceAngles& a, std::int64_t stamp_us)
{
    nlohmann::ordered_json j;
    j["roll_deg"] = rad2deg(a.roll);
    j["yaw_deg"] = rad2deg(a.yaw);
    j["pitch_deg"] = rad2deg(a.pitch);
    j["stamp_us"] = stamp_us;
    return j;
}

HeadPose head_pose_from_payload(const nlohmann::ordered_json& payload)
{
    try {
        HeadPose p;
        p.roll = deg2rad(payload.at("roll_deg").get<double>());
        p.pitch = deg2rad(payload.at("pitch_deg").get<double>());
        p.yaw = deg2rad(payload.at("yaw_deg").get<double>());
        if (!std::isfinite(p.roll) || !std::isfinite(p.pitch) || !std::isfinite(p.yaw)) {
            throw Error(ErrorCode::MalformedFrame, "non-finite angle");
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedFrame, std::string("angles payload: ") + e.what());
    }
}

nlohmann::ordered_json eye_payload(const EyeCommand& e)
{
    nlohmann::ordered_json j;
    j["pan_deg"] = rad2deg(e.pan);
    j["tilt_deg"] = rad2deg(e.tilt);
    j["lid"] = e.lid;
    return j;
}

// ---------------------------------------------------------------------------
// agile_eye

nlohmann::ordered_json to_json(const RunReport& r)
{
    nlohmann::ordered_json j;
    j["frames_processed"] = r.frames_processed;
    j["frames_accepted"] = r.frames_accepted;
    j["frames_held"] = r.frames_held;
    j["guard_holds"] = r.guard_holds;
    j["singular_holds"] = r.singular_holds;
    j["frames_skipped"] = r.frames_skipped;
    j["rms_error_deg"] = {{"roll", r.rms_roll_deg}, {"pitch", r.rms_pitch_deg}, {"yaw", r.rms_yaw_deg}};
    j["max_joint_velocity_deg_s"] = r.max_joint_velocity_deg_s;
    j["sim_duration_s"] = r.sim_duration_s;
    j["control_ticks"] = r.control_ticks;
    return j;
}

AgileEyeSimulator::AgileEyeSimulator(const PipelineConfig& cfg)
    : cfg_(cfg), guard_(cfg.guard), servos_(cfg.pid, cfg.servo), trajectory_(Trajectory345::hold({}))
{
}

void AgileEyeSimulator::on_angles(std::int64_t stamp_us, const HeadPose& commanded)
{
    GuardDecision decision = GuardDecision::Hold;
    try {
        decision = guard_.check({stamp_us, commanded});
    } catch (const Error&) {
        // Out-of-order stamp: treat like a guard rejection.
    }
    if (decision == GuardDecision::Hold) {
        ++guard_holds_;
        return;
    }

    const HeadPose clamped = clamp_to_workspace(commanded, cfg_.workspace);
    JointAngles goal;
    try {
        goal = head_to_joints(clamped);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularPose && e.code() != ErrorCode::GimbalLock) {
            throw;
        }
        ++singular_holds_;
        return;
    }

    commanded_ = clamped;
    ++accepted_;
    const JointAngles& end = trajectory_.end();
    if (std::abs(goal.theta1 - end.theta1) < 1e-12 && std::abs(goal.theta2 - end.theta2) < 1e-12 &&
        std::abs(goal.theta3 - end.theta3) < 1e-12) {
        return;  // already heading there
    }

    // Restart from the current planned position with zero boundary velocity.
    const double now = time();
    const JointAngles from = trajectory_.at(now - trajectory_start_).position;
    trajectory_ = Trajectory345(from, goal, move_duration(from, goal, cfg_.timing));
    trajectory_start_ = now;
}

void AgileEyeSimulator::tick()
{
    ++ticks_;
    const double t = time();
    const TrajectorySample sample = trajectory_.at(t - trajectory_start_);
    // Velocity feedforward plus (tau - dt) * acceleration, the inverse of the
    // discretised first-order servo lag.
    const double lead = std::max(0.0, cfg_.servo.tau_m - cfg_.control_dt);
    JointAngles feedforward;
    for (int i = 0; i < 3; ++i) {
        feedforward[i] = sample.velocity[i] + lead * sample.acceleration[i];
    }
    servos_.step(sample.position, feedforward, cfg_.control_dt);

    TickRow row;
    row.t = t;
    row.setpoint = sample.position;
    row.position = servos_.position();
    try {
        row.pose = joints_to_head(row.position, fkp_seed_);
    } catch (const Error&) {
        row.pose = last_.pose;
    }

    const double er = row.pose.roll - commanded_.roll;
    const double ep = row.pose.pitch - commanded_.pitch;
    const double ey = row.pose.yaw - commanded_.yaw;
    sq_roll_ += er * er;
    sq_pitch_ += ep * ep;
    sq_yaw_ += ey * ey;
    const JointAngles v = servos_.velocity();
    for (int i = 0; i < 3; ++i) {
        max_joint_velocity_ = std::max(max_joint_velocity_, std::abs(v[i]));
    }

    last_ = row;
    if (recording_) {
        rows_.push_back(row);
    }
}

void AgileEyeSimulator::advance_to(double t_s)
{
    while (time() + 0.5 * cfg_.control_dt <= t_s) {
        tick();
    }
}

RunReport AgileEyeSimulator::report() const
{
    RunReport r;
    r.frames_accepted = accepted_;
    r.guard_holds = guard_holds_;
    r.singular_holds = singular_holds_;
    r.frames_held = guard_holds_ + singular_holds_;
    r.frames_processed = r.frames_accepted + r.frames_held;
    r.frames_skipped = skipped_;
    if (ticks_ > 0) {
        const double n = static_cast<double>(ticks_);
        r.rms_roll_deg = rad2deg(std::sqrt(sq_roll_ / n));
        r.rms_pitch_deg = rad2deg(std::sqrt(sq_pitch_ / n));
        r.rms_yaw_deg = rad2deg(std::sqrt(sq_yaw_ / n));
    }
    r.max_joint_velocity_deg_s = rad2deg(max_joint_velocity_);
    r.sim_duration_s = time();
    r.control_ticks = ticks_;
    return r;
}

RunResult simulate_trace(const PipelineConfig& cfg, const std::vector<LandmarkFrame>& frames)
{
    const FaceAnglesProcessor processor(cfg);
    AgileEyeSimulator sim(cfg);
    std::optional<std::int64_t> first_stamp;
    std::int64_t last_stamp = 0;
    std::uint64_t skipped = 0;

    for (const LandmarkFrame& f : frames) {
        FaceAnglesProcessor::Output out;
        try {
            out = processor.process(f);
        } catch (const Error&) {
            ++skipped;
            continue;
        }
        // Same degree round trip as the bus path, so both agree bit for bit.
        const HeadPose pose = head_pose_from_payload(angles_payload(out.angles, f.stamp_us));
        if (!first_stamp) {
            first_stamp = f.stamp_us;
        }
        last_stamp = f.stamp_us;
        sim.advance_to(static_cast<double>(f.stamp_us - *first_stamp) * 1e-6);
        sim.on_angles(f.stamp_us, pose);
    }
    if (first_stamp) {
        sim.advance_to(static_cast<double>(last_stamp - *first_stamp) * 1e-6 + cfg.settle_s);
    }
    sim.set_frames_skipped(skipped);
    return {sim.report(), sim.rows()};
}

std::string format_csv(const std::vector<TickRow>& rows)
{
    std::string out = std::string(kCsvHeader) + "\n";
    for (const TickRow& r : rows) {
        out += fmt::format("{:.6f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f}\n", r.t,
                           rad2deg(r.setpoint.theta1), rad2deg(r.setpoint.theta2),
                           rad2deg(r.setpoint.theta3), rad2deg(r.position.theta1),
                           rad2deg(r.position.theta2), rad2deg(r.position.theta3),
                           rad2deg(r.pose.roll), rad2deg(r.pose.pitch), rad2deg(r.pose.yaw));
    }
    return out;
}

void write_report(const std::filesystem::path& dir, const RunResult& run)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorCode::IoError, dir.string() + ": " + ec.message());
    }
    const auto write = [](const std::filesystem::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        out << text;
        if (!out) {
            throw Error(ErrorCode::IoError, "cannot write " + path.string());
        }
    };
    write(dir / "report.json", to_json(run.report).dump(2) + "\n");
    write(dir / "trajectory.csv", format_csv(run.rows));
}

}  // namespace agile_head
