#pragma once

#include "agile_head/bus.hpp"
#include "agile_head/config.hpp"
#include "agile_head/control.hpp"
#include "agile_head/facepose.hpp"
#include "agile_head/regressor.hpp"
#include "agile_head/trajectory.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace agile_head {

// Topic names of the computation graph.
namespace topics {
inline const std::string kLandmarks = "landmarks";
inline const std::string kLandmarksEnd = "landmarks_end";
inline const std::string kAngles = "angles";
inline const std::string kAnglesEnd = "angles_end";
inline const std::string kEye = "eye";
inline const std::string kJointStates = "joint_states";
inline const std::string kNodeStatus = "node_status";
}  // namespace topics

/// Frame -> face angles and eye command, by geometry or by the two linear
/// models (roll is always geometric).
class FaceAnglesProcessor {
public:
    explicit FaceAnglesProcessor(const PipelineConfig& cfg);

    struct Output {
        FaceAngles angles;
        EyeCommand eye;
    };

    Output process(const LandmarkFrame& f) const;

private:
    PipelineConfig cfg_;
    std::optional<LinearPoseModel> horizontal_;
    std::optional<LinearPoseModel> vertical_;
};

nlohmann::ordered_json angles_payload(const FaceAngles& a, std::int64_t stamp_us);
HeadPose head_pose_from_payload(const nlohmann::ordered_json& payload);
nlohmann::ordered_json eye_payload(const EyeCommand& e);

/// One control tick of the simulated robot, angles in radians.
struct TickRow {
    double t = 0.0;
    JointAngles setpoint;
    JointAngles position;
    HeadPose pose;  // end-effector pose from fkp of `position`
};

struct RunReport {
    std::uint64_t frames_processed = 0;
    std::uint64_t frames_accepted = 0;
    std::uint64_t frames_held = 0;     // guard holds + singular holds
    std::uint64_t guard_holds = 0;
    std::uint64_t singular_holds = 0;
    std::uint64_t frames_skipped = 0;  // rejected upstream by face_angles
    double rms_roll_deg = 0.0;
    double rms_pitch_deg = 0.0;
    double rms_yaw_deg = 0.0;
    double max_joint_velocity_deg_s = 0.0;
    double sim_duration_s = 0.0;
    std::uint64_t control_ticks = 0;
};

nlohmann::ordered_json to_json(const RunReport& r);

/// The agile_eye control core: speed guard, workspace clamp, IKP, 3-4-5
/// re-planning and PID-driven servos, stepped on a fixed control tick.
/// Single-owner; not thread-safe.
class AgileEyeSimulator {
public:
    explicit AgileEyeSimulator(const PipelineConfig& cfg);

    /// Feeds one commanded head pose (face angles) stamped in microseconds.
    void on_angles(std::int64_t stamp_us, const HeadPose& commanded);

    /// Advances one control tick.
    void tick();

    /// Ticks until the simulated clock reaches t_s (within half a tick).
    void advance_to(double t_s);

    double time() const { return static_cast<double>(ticks_) * cfg_.control_dt; }
    const std::vector<TickRow>& rows() const { return rows_; }
    const TickRow& last_row() const { return last_; }
    JointAngles target() const { return trajectory_.end(); }
    const HeadPose& commanded() const { return commanded_; }

    RunReport report() const;

    void set_recording(bool on) { recording_ = on; }
    void set_frames_skipped(std::uint64_t n) { skipped_ = n; }

private:
    PipelineConfig cfg_;
    SpeedGuard guard_;
    ServoBank servos_;
    Trajectory345 trajectory_;
    double trajectory_start_ = 0.0;
    std::uint64_t ticks_ = 0;

    HeadPose commanded_;
    EulerZYX fkp_seed_;
    TickRow last_;
    std::vector<TickRow> rows_;
    bool recording_ = true;

    std::uint64_t accepted_ = 0;
    std::uint64_t guard_holds_ = 0;
    std::uint64_t singular_holds_ = 0;
    std::uint64_t skipped_ = 0;
    double sq_roll_ = 0.0, sq_pitch_ = 0.0, sq_yaw_ = 0.0;
    double max_joint_velocity_ = 0.0;
};

struct RunResult {
    RunReport report;
    std::vector<TickRow> rows;
};

/// Batch semantics without a bus: every frame in order, the control clock
/// following frame timestamps, then `settle_s` of tail.
RunResult simulate_trace(const PipelineConfig& cfg, const std::vector<LandmarkFrame>& frames);

inline constexpr const char* kCsvHeader =
    "t_s,set1_deg,set2_deg,set3_deg,pos1_deg,pos2_deg,pos3_deg,roll_deg,pitch_deg,yaw_deg";

std::string format_csv(const std::vector<TickRow>& rows);

/// Writes report.json and trajectory.csv into `dir` (created if missing).
void write_report(const std::filesystem::path& dir, const RunResult& run);

// ---------------------------------------------------------------------------
// Nodes

struct NodeOptions {
    std::string broker;  // host:port
    bool batch = false;  // lossless queues, exit after the end-of-stream marker
    std::filesystem::path out_dir;  // agile_eye: where the report goes
    const std::atomic<bool>* stop = nullptr;  // live mode: set to request shutdown
};

struct FaceAnglesStats {
    int exit_code = 0;
    std::uint64_t received = 0;
    std::uint64_t published = 0;
    std::uint64_t skipped = 0;
};

/// landmarks -> angles + eye. In batch mode exits after forwarding the
/// end-of-stream marker; in live mode runs until stopped or the broker drops
/// (exit code 1).
FaceAnglesStats run_face_angles_node(const PipelineConfig& cfg, const NodeOptions& opts);

struct AgileEyeStats {
    int exit_code = 0;
    RunReport report;
};

/// angles -> simulated robot. Batch mode drives the control clock from the
/// message stamps and writes the report on end-of-stream; live mode ticks on
/// a wall-clock timer.
AgileEyeStats run_agile_eye_node(const PipelineConfig& cfg, const NodeOptions& opts);

/// Publishes frames on `landmarks` at their recorded spacing divided by
/// `speed` (0 = as fast as possible), then the end-of-stream marker.
/// Returns the number of frames published.
std::size_t replay(bus::Client& client, const std::vector<LandmarkFrame>& frames, double speed);

struct RunOptions {
    std::filesystem::path trace;
    std::filesystem::path config;
    std::filesystem::path out_dir;
    std::filesystem::path executable;  // binary providing the node subcommands
    double speed = 0.0;
    double timeout_s = 120.0;
};

/// Starts a broker, launches face-angles and agile-eye as child processes,
/// replays the trace and waits for the report. Returns a process exit code.
int run_pipeline(const RunOptions& opts);

}  // namespace agile_head
