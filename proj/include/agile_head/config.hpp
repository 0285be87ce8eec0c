#pragma once

#include "agile_head/control.hpp"
#include "agile_head/facepose.hpp"
#include "agile_head/kinematics.hpp"
#include "agile_head/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace agile_head {

enum class PoseMethod { Geometry, Regression };

struct PipelineConfig {
    PoseMethod method = PoseMethod::Geometry;
    std::filesystem::path horizontal_model;
    std::filesystem::path vertical_model;

    WorkspaceLimits workspace;
    PidGains pid;
    ServoPlant servo{0.0, 0.0, deg2rad(300.0), 0.02};
    double control_dt = 0.005;  // s
    TimingLaw timing;
    SpeedGuardConfig guard{deg2rad(90.0), 3};

    LandmarkIndexSets landmarks;
    double pitch_offset = kDefaultPitchOffset;
    EyeMapping eye;

    std::string broker = "127.0.0.1:7447";
    double settle_s = 1.0;                 // simulated tail after the last frame in batch mode
    std::size_t mailbox_capacity = 16;     // live-mode subscription queues
    int joint_state_every = 4;             // publish joint_states every N control ticks
};

/// Reads a JSON config. Every key is optional; unknown keys and wrong types
/// raise ErrorCode::ConfigError. Model paths are resolved against the
/// config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& j,
                                const std::filesystem::path& base_dir = {});

/// Full config with every key spelled out, angles in degrees.
nlohmann::json to_json(const PipelineConfig& c);

/// Throws ErrorCode::ConfigError on out-of-range values.
void validate(const PipelineConfig& c);

}  // namespace agile_head
