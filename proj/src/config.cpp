#include "agile_head/config.hpp"

#include "agile_head/error.hpp"

#include <fstream>
#include <cmath>
#include <optional>
#include <set>

namespace agile_head {

namespace {

using json = nlohmann::json;

// Walks one JSON object, rejecting keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            fail("expected an object");
        }
    }

    template <typename T>
    void read(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(std::string("wrong type for '") + key + "'");
        }
    }

    void read_deg(const char* key, double& rad)
    {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        double deg = 0.0;
        read(key, deg);
        rad = deg2rad(deg);
    }

    std::optional<Section> sub(const char* key)
    {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return std::nullopt;
        }
        return Section(j_.at(key), path_ + key + ".");
    }

    void finish() const
    {
        for (const auto& [key, value] : j_.items()) {
            if (seen_.count(key) == 0) {
                throw Error(ErrorCode::ConfigError, "unknown key '" + path_ + key + "'");
            }
        }
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw Error(ErrorCode::ConfigError, (path_.empty() ? "config" : path_) + ": " + what);
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string method_name(PoseMethod m)
{
    return m == PoseMethod::Geometry ? "geometry" : "regression";
}

}  // namespace

PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir)
{
    PipelineConfig c;
    Section root(j, "");

    std::string method = method_name(c.method);
    root.read("method", method);
    if (method == "geometry") {
        c.method = PoseMethod::Geometry;
    } else if (method == "regression") {
        c.method = PoseMethod::Regression;
    } else {
        root.fail("method must be 'geometry' or 'regression'");
    }

    if (auto s = root.sub("models")) {
        std::string h, v;
        s->read("horizontal", h);
        s->read("vertical", v);
        s->finish();
        const auto resolve = [&](const std::string& p) -> std::filesystem::path {
            if (p.empty()) {
                return {};
            }
            const std::filesystem::path path(p);
            return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
        };
        c.horizontal_model = resolve(h);
        c.vertical_model = resolve(v);
    }
    if (auto s = root.sub("workspace_deg")) {
        s->read_deg("roll", c.workspace.max_roll);
        s->read_deg("pitch", c.workspace.max_pitch);
        s->read_deg("yaw", c.workspace.max_yaw);
        s->finish();
    }
    if (auto s = root.sub("pid")) {
        s->read("kp", c.pid.kp);
        s->read("ki", c.pid.ki);
        s->read("kd", c.pid.kd);
        s->read("i_max", c.pid.i_max);
        s->finish();
    }
    if (auto s = root.sub("servo")) {
        s->read_deg("v_limit_deg_s", c.servo.v_limit);
        s->read("tau_s", c.servo.tau_m);
        s->finish();
    }
    root.read("control_dt_s", c.control_dt);
    if (auto s = root.sub("planner")) {
        s->read_deg("v_max_deg_s", c.timing.v_max);
        s->read("t_min_s", c.timing.t_min);
        s->finish();
    }
    if (auto s = root.sub("speed_guard")) {
        s->read_deg("max_head_speed_deg_s", c.guard.max_head_speed);
        s->read("window", c.guard.window);
        s->finish();
    }
    if (auto s = root.sub("landmarks")) {
        s->read("left_eye", c.landmarks.left_eye);
        s->read("right_eye", c.landmarks.right_eye);
        s->read("nose_top", c.landmarks.nose_top);
        s->read("nose_lower", c.landmarks.nose_lower);
        s->read("left_eyelid", c.landmarks.left_eyelid);
        s->read("right_eyelid", c.landmarks.right_eyelid);
        s->finish();
    }
    if (auto s = root.sub("calibration")) {
        s->read_deg("pitch_offset_deg", c.pitch_offset);
        s->read("eyelid_area_min", c.eye.eyelid.area_min);
        s->read("eyelid_area_max", c.eye.eyelid.area_max);
        s->finish();
    }
    if (auto s = root.sub("eye")) {
        s->read_deg("pan_max_deg", c.eye.pan_max);
        s->read_deg("tilt_max_deg", c.eye.tilt_max);
        s->finish();
    }
    root.read("broker", c.broker);
    root.read("settle_s", c.settle_s);
    root.read("mailbox_capacity", c.mailbox_capacity);
    root.read("joint_state_every", c.joint_state_every);
    root.finish();

    validate(c);
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

void validate(const PipelineConfig& c)
{
    const auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw Error(ErrorCode::ConfigError, what);
        }
    };
    require(c.workspace.max_roll > 0 && c.workspace.max_pitch > 0 && c.workspace.max_yaw > 0,
            "workspace limits must be positive");
    require(c.pid.kp >= 0 && c.pid.ki >= 0 && c.pid.kd >= 0, "PID gains must be non-negative");
    require(c.pid.i_max > 0, "pid.i_max must be positive");
    require(c.servo.v_limit > 0 && c.servo.tau_m >= 0, "servo limits must be positive");
    require(c.control_dt > 0, "control_dt_s must be positive");
    require(c.timing.v_max > 0 && c.timing.t_min >= c.control_dt,
            "planner needs v_max > 0 and t_min >= control_dt_s");
    require(c.guard.max_head_speed > 0 && c.guard.window >= 1, "speed guard values must be positive");
    require(c.eye.pan_max > 0 && c.eye.tilt_max > 0, "eye limits must be positive");
    require(c.eye.eyelid.area_max > c.eye.eyelid.area_min && c.eye.eyelid.area_min >= 0,
            "eyelid calibration needs max > min >= 0");
    require(c.settle_s >= 0, "settle_s must be non-negative");
    require(c.mailbox_capacity >= 1, "mailbox_capacity must be at least 1");
    require(c.joint_state_every >= 1, "joint_state_every must be at least 1");
    require(c.method == PoseMethod::Geometry ||
                (!c.horizontal_model.empty() && !c.vertical_model.empty()),
            "regression method needs models.horizontal and models.vertical");
    const auto idx_ok = [](const std::vector<int>& v) {
        for (int i : v) {
            if (i < 0 || i >= static_cast<int>(kLandmarkCount)) {
                return false;
            }
        }
        return !v.empty();
    };
    require(idx_ok(c.landmarks.left_eye) && idx_ok(c.landmarks.right_eye) &&
                idx_ok(c.landmarks.left_eyelid) && idx_ok(c.landmarks.right_eyelid) &&
                idx_ok({c.landmarks.nose_top}) && idx_ok({c.landmarks.nose_lower}),
            "landmark indices must lie in [0, 468)");
    require(c.landmarks.left_eyelid.size() >= 3 && c.landmarks.right_eyelid.size() >= 3,
            "eyelid polygons need at least 3 landmarks");
}

namespace {

// Degrees for output; snaps values that miss a round number only by conversion noise.
double out_deg(double rad)
{
    const double d = rad2deg(rad);
    const double snapped = std::round(d * 1e6) / 1e6;
    return std::abs(d - snapped) < 1e-9 ? snapped : d;
}

}  // namespace

json to_json(const PipelineConfig& c)
{
    return {
        {"method", method_name(c.method)},
        {"models", {{"horizontal", c.horizontal_model.string()}, {"vertical", c.vertical_model.string()}}},
        {"workspace_deg",
         {{"roll", out_deg(c.workspace.max_roll)},
          {"pitch", out_deg(c.workspace.max_pitch)},
          {"yaw", out_deg(c.workspace.max_yaw)}}},
        {"pid", {{"kp", c.pid.kp}, {"ki", c.pid.ki}, {"kd", c.pid.kd}, {"i_max", c.pid.i_max}}},
        {"servo", {{"v_limit_deg_s", out_deg(c.servo.v_limit)}, {"tau_s", c.servo.tau_m}}},
        {"control_dt_s", c.control_dt},
        {"planner", {{"v_max_deg_s", out_deg(c.timing.v_max)}, {"t_min_s", c.timing.t_min}}},
        {"speed_guard",
         {{"max_head_speed_deg_s", out_deg(c.guard.max_head_speed)}, {"window", c.guard.window}}},
        {"landmarks",
         {{"left_eye", c.landmarks.left_eye},
          {"right_eye", c.landmarks.right_eye},
          {"nose_top", c.landmarks.nose_top},
          {"nose_lower", c.landmarks.nose_lower},
          {"left_eyelid", c.landmarks.left_eyelid},
          {"right_eyelid", c.landmarks.right_eyelid}}},
        {"calibration",
         {{"pitch_offset_deg", out_deg(c.pitch_offset)},
          {"eyelid_area_min", c.eye.eyelid.area_min},
          {"eyelid_area_max", c.eye.eyelid.area_max}}},
        {"eye", {{"pan_max_deg", out_deg(c.eye.pan_max)}, {"tilt_max_deg", out_deg(c.eye.tilt_max)}}},
        {"broker", c.broker},
        {"settle_s", c.settle_s},
        {"mailbox_capacity", c.mailbox_capacity},
        {"joint_state_every", c.joint_state_every},
    };
}

}  // namespace agile_head
