#include "agile_head/error.hpp"
#include "agile_head/pipeline.hpp"
#include "support.hpp"

#include <doctest.h>

#include <chrono>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <thread>

using namespace agile_head;
using namespace std::chrono_literals;

namespace {

template <typename Pred>
bool eventually(Pred p, std::chrono::milliseconds timeout = 10000ms)
{
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (!p()) {
        if (std::chrono::steady_clock::now() > deadline) {
            return false;
        }
        std::this_thread::sleep_for(1ms);
    }
    return true;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<double>> csv_rows(const std::string& csv)
{
    std::vector<std::vector<double>> rows;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<double> r;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            r.push_back(std::stod(cell));
        }
        rows.push_back(r);
    }
    return rows;
}

ErrorCode config_error(const std::string& text)
{
    try {
        config_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

HeadPose yaw_deg(double d) { return {0.0, 0.0, deg2rad(d)}; }

// Broker plus both nodes in threads, batch mode.
struct BusRun {
    FaceAnglesStats face;
    AgileEyeStats eye;
};

BusRun run_over_bus(const PipelineConfig& cfg, const std::vector<LandmarkFrame>& frames,
                    const std::filesystem::path& out_dir = {})
{
    bus::Broker broker({"127.0.0.1", 0});
    broker.start();
    const std::string addr = "127.0.0.1:" + std::to_string(broker.port());

    std::mutex mu;
    std::set<std::string> ready;
    bus::Client driver(addr);
    driver.subscribe(topics::kNodeStatus, [&](const bus::Message& m) {
        std::lock_guard lock(mu);
        ready.insert(m.payload["node"].get<std::string>());
    });

    NodeOptions face_opts{addr, true, {}, nullptr};
    NodeOptions eye_opts{addr, true, out_dir, nullptr};
    auto face = std::async(std::launch::async, [&] { return run_face_angles_node(cfg, face_opts); });
    auto eye = std::async(std::launch::async, [&] { return run_agile_eye_node(cfg, eye_opts); });
    REQUIRE(eventually([&] {
        std::lock_guard lock(mu);
        return ready.size() == 2;
    }));
    replay(driver, frames, 0.0);
    BusRun r{face.get(), eye.get()};
    driver.close();
    broker.stop();
    return r;
}

}  // namespace

TEST_CASE("config defaults round trip")
{
    const PipelineConfig d;
    const auto j = to_json(d);
    const PipelineConfig back = config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.pid.kp == d.pid.kp);
    CHECK(back.control_dt == d.control_dt);
    CHECK(back.pitch_offset == d.pitch_offset);
    CHECK(back.workspace.max_roll == d.workspace.max_roll);
    CHECK(back.guard.max_head_speed == d.guard.max_head_speed);

    const PipelineConfig committed = load_config(test_support::data_dir() / "configs" / "default.json");
    CHECK(to_json(committed) == j);
}

TEST_CASE("config rejects unknown keys and bad values")
{
    CHECK(config_error(R"({"bogus": 1})") == ErrorCode::ConfigError);
    CHECK(config_error(R"({"pid": {"kp": 1, "kq": 2}})") == ErrorCode::ConfigError);
    CHECK(config_error(R"({"pid": {"kp": "fast"}})") == ErrorCode::ConfigError);
    CHECK(config_error(R"({"method": "magic"})") == ErrorCode::ConfigError);
    CHECK(config_error(R"({"control_dt_s": 0})") == ErrorCode::ConfigError);
    CHECK(config_error(R"({"workspace_deg": {"roll": -1}})") == ErrorCode::ConfigError);
    CHECK(config_error(R"({"landmarks": {"nose_top": 468}})") == ErrorCode::ConfigError);
    CHECK(config_error(R"({"calibration": {"eyelid_area_min": 0.1, "eyelid_area_max": 0.05}})") ==
          ErrorCode::ConfigError);
    CHECK(config_error(R"({"method": "regression"})") == ErrorCode::ConfigError);

    const auto c = config_from_json(nlohmann::json::parse(R"({"pid": {"kp": 3}, "workspace_deg": {"yaw": 10}})"));
    CHECK(c.pid.kp == 3.0);
    CHECK(c.pid.ki == PidGains{}.ki);
    CHECK(c.workspace.max_yaw == doctest::Approx(deg2rad(10)));
    CHECK(c.workspace.max_roll == WorkspaceLimits{}.max_roll);
}

TEST_CASE("config model paths resolve against the file")
{
    const auto dir = test_support::scratch_dir("config");
    std::ofstream(dir / "c.json") << R"({"method": "regression", "models": {"horizontal": "h.json", "vertical": "/abs/v.json"}})";
    const auto c = load_config(dir / "c.json");
    CHECK(c.method == PoseMethod::Regression);
    CHECK(c.horizontal_model == dir / "h.json");
    CHECK(c.vertical_model == "/abs/v.json");
    std::ofstream(dir / "broken.json") << "{";
    CHECK_THROWS_AS(load_config(dir / "broken.json"), Error);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("neutral frame gives zero angles")
{
    const FaceAnglesProcessor p{PipelineConfig{}};
    const auto out = p.process(render_frame(test_support::canonical_mesh(), {}, {}, 0));
    CHECK(std::abs(rad2deg(out.angles.roll)) < 0.5);
    CHECK(std::abs(rad2deg(out.angles.yaw)) < 0.5);
    CHECK(std::abs(rad2deg(out.angles.pitch)) < 0.5);
    CHECK(out.eye.lid > 0.9);
}

TEST_CASE("angles payload")
{
    const auto j = angles_payload({deg2rad(1), deg2rad(2), deg2rad(3)}, 42);
    CHECK(j.dump() == nlohmann::ordered_json::parse(
                          R"({"roll_deg":1.0,"yaw_deg":2.0,"pitch_deg":3.0,"stamp_us":42})").dump());
    const HeadPose p = head_pose_from_payload(j);
    CHECK(p.roll == doctest::Approx(deg2rad(1)));
    CHECK(p.yaw == doctest::Approx(deg2rad(2)));
    CHECK(p.pitch == doctest::Approx(deg2rad(3)));
    CHECK_THROWS_AS(head_pose_from_payload({{"roll_deg", 1}}), Error);
    CHECK_THROWS_AS(head_pose_from_payload({{"roll_deg", "x"}, {"yaw_deg", 0}, {"pitch_deg", 0}}), Error);
}

TEST_CASE("simulator equilibrium at the reference pose")
{
    AgileEyeSimulator sim{PipelineConfig{}};
    for (int k = 0; k < 60; ++k) {
        sim.advance_to(k / 30.0);
        sim.on_angles(static_cast<std::int64_t>(k) * 33333, {});
    }
    sim.advance_to(3.0);
    for (const auto& row : sim.rows()) {
        for (int j = 0; j < 3; ++j) {
            CHECK(std::abs(rad2deg(row.position[j])) < 0.05);
        }
    }
    CHECK(sim.report().frames_accepted == 60);
}

TEST_CASE("yaw step converges to the ikp target")
{
    AgileEyeSimulator sim{PipelineConfig{}};
    sim.on_angles(0, {});
    sim.advance_to(0.5);
    sim.on_angles(500000, yaw_deg(10));
    const JointAngles goal = head_to_joints(yaw_deg(10));
    CHECK(sim.target() == goal);
    sim.advance_to(2.0);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(rad2deg(sim.last_row().position[j] - goal[j])) < 0.2);
    }
    const auto& rows = sim.rows();
    // zero boundary velocity: setpoint flat at the end of the move
    const auto n = rows.size();
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(rows[n - 1].setpoint[j] - rows[n - 2].setpoint[j]) < 1e-12);
    }
    CHECK(std::abs(rad2deg(sim.last_row().pose.yaw) - 10.0) < 0.2);
}

TEST_CASE("speed guard holds the setpoint")
{
    AgileEyeSimulator sim{PipelineConfig{}};
    sim.on_angles(0, {});
    sim.advance_to(0.0333);
    sim.on_angles(33333, yaw_deg(14));  // 420 deg/s
    CHECK(sim.target() == JointAngles{});
    auto r = sim.report();
    CHECK(r.guard_holds == 1);
    CHECK(r.frames_held == 1);
    CHECK(r.frames_accepted == 1);
    CHECK(r.frames_processed == 2);

    sim.on_angles(33333, {});  // repeated stamp
    CHECK(sim.report().guard_holds == 2);
}

TEST_CASE("workspace clamp on commanded poses")
{
    AgileEyeSimulator sim{PipelineConfig{}};
    sim.on_angles(0, {0.0, 0.0, 0.0});
    sim.advance_to(2.0);
    sim.on_angles(2000000, {deg2rad(40), 0.0, 0.0});
    CHECK(sim.commanded().roll == WorkspaceLimits{}.max_roll);
    CHECK(sim.target() == head_to_joints({WorkspaceLimits{}.max_roll, 0.0, 0.0}));
}

TEST_CASE("smooth trace fidelity, workspace and determinism")
{
    const auto frames = read_trace(test_support::data_dir() / "traces" / "smooth_300.jsonl");
    REQUIRE(frames.size() == 300);
    const PipelineConfig cfg;
    const auto a = simulate_trace(cfg, frames);
    const auto b = simulate_trace(cfg, frames);
    CHECK(format_csv(a.rows) == format_csv(b.rows));
    CHECK(to_json(a.report) == to_json(b.report));
    CHECK(a.report.frames_processed == 300);
    CHECK(a.report.frames_processed == a.report.frames_accepted + a.report.frames_held);
    CHECK(a.report.rms_roll_deg < 0.5);
    CHECK(a.report.rms_pitch_deg < 0.5);
    CHECK(a.report.rms_yaw_deg < 0.5);
    for (const auto& row : a.rows) {
        CHECK(within_workspace(row.pose, cfg.workspace, 1e-9));
    }
}

TEST_CASE("step trace peak velocity follows the 3-4-5 bound")
{
    const auto frames = synth_step_trace(test_support::canonical_mesh(), {0.0, deg2rad(15), 0.0}, 90, 30.0, 0.5);
    const PipelineConfig cfg;
    const auto run = simulate_trace(cfg, frames);
    const auto rows = csv_rows(format_csv(run.rows));
    REQUIRE(rows.size() > 10);

    const auto& last = rows.back();
    double dq = 0.0;
    for (int j = 0; j < 3; ++j) {
        dq = std::max(dq, std::abs(last[1 + static_cast<std::size_t>(j)]));
    }
    const double T = std::max(cfg.timing.t_min, deg2rad(dq) / cfg.timing.v_max);
    const double bound = 1.875 * dq / T;
    double peak_set = 0.0, peak_pos = 0.0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double dt = rows[k][0] - rows[k - 1][0];
        for (std::size_t j = 1; j <= 3; ++j) {
            peak_set = std::max(peak_set, std::abs(rows[k][j] - rows[k - 1][j]) / dt);
            peak_pos = std::max(peak_pos, std::abs(rows[k][j + 3] - rows[k - 1][j + 3]) / dt);
        }
    }
    CHECK(peak_set <= bound * 1.01);
    CHECK(peak_pos <= bound * 1.01);
    CHECK(run.report.max_joint_velocity_deg_s <= bound * 1.01);
}

TEST_CASE("zero-frame run writes an empty report")
{
    const auto dir = test_support::scratch_dir("zero");
    const auto run = simulate_trace(PipelineConfig{}, {});
    write_report(dir, run);
    CHECK(slurp(dir / "trajectory.csv") == std::string(kCsvHeader) + "\n");
    const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(j["frames_processed"] == 0);
    CHECK(j["frames_held"] == 0);
    CHECK(j["control_ticks"] == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("unwritable report directory")
{
    CHECK_THROWS_AS(write_report("/proc/agile_head_nope", simulate_trace(PipelineConfig{}, {})), Error);
}

TEST_CASE("nodes over the bus match the in-process simulation")
{
    const auto frames = read_trace(test_support::data_dir() / "traces" / "smooth_300.jsonl");
    const PipelineConfig cfg;
    const auto dir = test_support::scratch_dir("bus_run");
    const auto r = run_over_bus(cfg, frames, dir);
    CHECK(r.face.exit_code == 0);
    CHECK(r.eye.exit_code == 0);
    CHECK(r.face.received == 300);
    CHECK(r.face.published == 300);
    const auto local = simulate_trace(cfg, frames);
    CHECK(to_json(r.eye.report) == to_json(local.report));
    CHECK(slurp(dir / "trajectory.csv") == format_csv(local.rows));
    std::filesystem::remove_all(dir);
}

TEST_CASE("100 frames give 100 angles and malformed frames are skipped")
{
    auto frames = synth_smooth_trace(test_support::canonical_mesh(), 100, 30.0);
    const PipelineConfig cfg;

    bus::Broker broker({"127.0.0.1", 0});
    broker.start();
    const std::string addr = "127.0.0.1:" + std::to_string(broker.port());
    std::atomic<int> angles{0}, eyes{0}, ready{0};
    std::atomic<std::uint64_t> end_frames{0}, end_skipped{0};
    bus::Client driver(addr);
    driver.subscribe(topics::kAngles, [&](const bus::Message&) { ++angles; }, 1024);
    driver.subscribe(topics::kEye, [&](const bus::Message&) { ++eyes; }, 1024);
    driver.subscribe(topics::kAnglesEnd, [&](const bus::Message& m) {
        end_skipped = m.payload["skipped"].get<std::uint64_t>();
        end_frames = m.payload["frames"].get<std::uint64_t>();
    });
    driver.subscribe(topics::kNodeStatus, [&](const bus::Message&) { ++ready; });

    NodeOptions opts{addr, true, {}, nullptr};
    auto face = std::async(std::launch::async, [&] { return run_face_angles_node(cfg, opts); });
    REQUIRE(eventually([&] { return ready == 1; }));

    driver.advertise(topics::kLandmarks);
    for (const auto& f : frames) {
        driver.publish(topics::kLandmarks, to_json(f), f.stamp_us);
    }
    driver.publish(topics::kLandmarks, {{"stamp_us", 1}, {"pts", "junk"}}, 1);
    auto too_few = to_json(frames[0]);
    too_few["pts"].erase(0);
    driver.publish(topics::kLandmarks, too_few, 2);
    driver.publish(topics::kLandmarksEnd, {{"frames", 102}}, 0);

    const auto stats = face.get();
    CHECK(stats.exit_code == 0);
    CHECK(stats.received == 102);
    CHECK(stats.published == 100);
    CHECK(stats.skipped == 2);
    REQUIRE(eventually([&] { return angles == 100 && eyes == 100 && end_frames == 100; }));
    CHECK(end_skipped == 2);
    driver.close();
}

TEST_CASE("node exits nonzero when the broker goes away")
{
    auto broker = std::make_unique<bus::Broker>(bus::BrokerOptions{"127.0.0.1", 0});
    broker->start();
    const std::string addr = "127.0.0.1:" + std::to_string(broker->port());
    std::atomic<int> ready{0};
    bus::Client watcher(addr);
    watcher.subscribe(topics::kNodeStatus, [&](const bus::Message&) { ++ready; });
    NodeOptions opts{addr, false, {}, nullptr};
    auto face = std::async(std::launch::async, [&] { return run_face_angles_node(PipelineConfig{}, opts); });
    REQUIRE(eventually([&] { return ready == 1; }));
    broker->stop();
    CHECK(face.get().exit_code == 1);
}

TEST_CASE("live agile_eye node stops on request and writes its report")
{
    bus::Broker broker({"127.0.0.1", 0});
    broker.start();
    const std::string addr = "127.0.0.1:" + std::to_string(broker.port());
    const auto dir = test_support::scratch_dir("live");
    std::atomic<bool> stop{false};
    std::atomic<int> ready{0}, states{0};
    bus::Client driver(addr);
    driver.subscribe(topics::kNodeStatus, [&](const bus::Message&) { ++ready; });
    driver.subscribe(topics::kJointStates, [&](const bus::Message&) { ++states; }, 256);
    NodeOptions opts{addr, false, dir, &stop};
    auto eye = std::async(std::launch::async, [&] { return run_agile_eye_node(PipelineConfig{}, opts); });
    REQUIRE(eventually([&] { return ready == 1; }));
    driver.publish(topics::kAngles, angles_payload({0, deg2rad(5), 0}, 0), 0);
    REQUIRE(eventually([&] { return states > 20; }));
    stop = true;
    const auto r = eye.get();
    CHECK(r.exit_code == 0);
    CHECK(r.report.frames_accepted == 1);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "trajectory.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("replay counts and pacing")
{
    bus::Broker broker({"127.0.0.1", 0});
    broker.start();
    const std::string addr = "127.0.0.1:" + std::to_string(broker.port());
    std::atomic<int> got{0}, ends{0};
    bus::Client sub(addr), pub(addr);
    sub.subscribe(topics::kLandmarks, [&](const bus::Message&) { ++got; }, 1024);
    sub.subscribe(topics::kLandmarksEnd, [&](const bus::Message& m) { ends = m.payload["frames"].get<int>(); });
    REQUIRE(eventually([&] { return broker.subscriber_count(topics::kLandmarksEnd) == 1; }));

    test_support::Gen g(81);
    std::vector<LandmarkFrame> frames;
    for (int i = 0; i < 100; ++i) {
        frames.push_back(g.frame(i * 33000));
    }
    CHECK(replay(pub, frames, 0.0) == 100);
    REQUIRE(eventually([&] { return got == 100 && ends == 100; }));

    got = 0;
    ends = -1;
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(replay(pub, frames, 1.0) == 100);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // 99 gaps of 33 ms
    CHECK(secs == doctest::Approx(3.267).epsilon(0.1));
    REQUIRE(eventually([&] { return got == 100 && ends == 100; }));

    ends = -1;
    CHECK(replay(pub, {}, 0.0) == 0);
    REQUIRE(eventually([&] { return ends == 0; }));
}
