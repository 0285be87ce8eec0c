#include "agile_head/pipeline.hpp"

#include "agile_head/error.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

extern char** environ;

namespace agile_head {

namespace {

using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kBatchQueueCapacity = std::size_t{1} << 22;

bool stop_requested(const NodeOptions& opts)
{
    return opts.stop != nullptr && opts.stop->load();
}

void announce_ready(bus::Client& client, const std::string& node)
{
    client.publish(topics::kNodeStatus, {{"node", node}, {"state", "ready"}}, 0);
}

// End-of-stream marker: the upstream node's frame count plus skip count.
struct EndMarker {
    std::mutex mu;
    bool seen = false;
    std::uint64_t frames = 0;
    std::uint64_t skipped = 0;

    void set(const bus::Message& m)
    {
        std::lock_guard lock(mu);
        seen = true;
        frames = m.payload.value("frames", std::uint64_t{0});
        skipped = m.payload.value("skipped", std::uint64_t{0});
    }

    bool get(std::uint64_t& f, std::uint64_t& s)
    {
        std::lock_guard lock(mu);
        f = frames;
        s = skipped;
        return seen;
    }

    void clear()
    {
        std::lock_guard lock(mu);
        seen = false;
    }
};

}  // namespace

FaceAnglesStats run_face_angles_node(const PipelineConfig& cfg, const NodeOptions& opts)
{
    FaceAnglesStats stats;
    const FaceAnglesProcessor processor(cfg);
    const std::size_t capacity = opts.batch ? kBatchQueueCapacity : cfg.mailbox_capacity;
    bus::LatestWinsQueue<bus::Message> mailbox(capacity);
    EndMarker end;
    bus::Client client(opts.broker);

    client.advertise(topics::kAngles);
    client.advertise(topics::kEye);
    client.advertise(topics::kAnglesEnd);
    client.subscribe(topics::kLandmarks, [&](const bus::Message& m) { mailbox.push(m); }, capacity);
    client.subscribe(topics::kLandmarksEnd, [&](const bus::Message& m) { end.set(m); }, 16);
    announce_ready(client, "face_angles");

    try {
        for (;;) {
            if (stop_requested(opts)) {
                break;
            }
            if (!client.connected()) {
                std::cerr << "face_angles: broker connection lost\n";
                stats.exit_code = 1;
                break;
            }
            if (auto m = mailbox.pop_for(20ms)) {
                ++stats.received;
                try {
                    const LandmarkFrame frame = frame_from_json(m->payload);
                    const auto out = processor.process(frame);
                    client.publish(topics::kAngles, angles_payload(out.angles, m->stamp_us), m->stamp_us);
                    client.publish(topics::kEye, eye_payload(out.eye), m->stamp_us);
                    ++stats.published;
                } catch (const Error& e) {
                    if (e.code() == ErrorCode::Disconnected) {
                        throw;
                    }
                    ++stats.skipped;
                    std::cerr << "face_angles: skipping frame seq " << m->seq << ": " << e.what() << '\n';
                }
                continue;
            }

            std::uint64_t expected = 0, upstream_skipped = 0;
            if (!end.get(expected, upstream_skipped)) {
                continue;
            }
            if (opts.batch && stats.received < expected) {
                continue;
            }
            nlohmann::ordered_json marker;
            marker["frames"] = stats.published;
            marker["skipped"] = stats.skipped + upstream_skipped;
            client.publish(topics::kAnglesEnd, marker, 0);
            end.clear();
            if (opts.batch) {
                break;
            }
        }
    } catch (const Error& e) {
        std::cerr << "face_angles: " << e.what() << '\n';
        stats.exit_code = 1;
    }
    client.close();
    return stats;
}

AgileEyeStats run_agile_eye_node(const PipelineConfig& cfg, const NodeOptions& opts)
{
    AgileEyeStats stats;
    AgileEyeSimulator sim(cfg);
    const std::size_t capacity = opts.batch ? kBatchQueueCapacity : cfg.mailbox_capacity;
    bus::LatestWinsQueue<bus::Message> mailbox(capacity);
    EndMarker end;
    bus::Client client(opts.broker);

    client.advertise(topics::kJointStates);
    client.subscribe(topics::kAngles, [&](const bus::Message& m) { mailbox.push(m); }, capacity);
    client.subscribe(topics::kAnglesEnd, [&](const bus::Message& m) { end.set(m); }, 16);
    announce_ready(client, "agile_eye");

    const auto publish_state = [&] {
        const TickRow& r = sim.last_row();
        nlohmann::ordered_json j;
        j["t_s"] = r.t;
        j["set_deg"] = {rad2deg(r.setpoint.theta1), rad2deg(r.setpoint.theta2), rad2deg(r.setpoint.theta3)};
        j["pos_deg"] = {rad2deg(r.position.theta1), rad2deg(r.position.theta2), rad2deg(r.position.theta3)};
        j["roll_deg"] = rad2deg(r.pose.roll);
        j["pitch_deg"] = rad2deg(r.pose.pitch);
        j["yaw_deg"] = rad2deg(r.pose.yaw);
        client.publish(topics::kJointStates, j, static_cast<std::int64_t>(std::llround(r.t * 1e6)));
    };

    const auto handle = [&](const bus::Message& m) -> std::optional<HeadPose> {
        try {
            return head_pose_from_payload(m.payload);
        } catch (const Error& e) {
            std::cerr << "agile_eye: dropping angles seq " << m.seq << ": " << e.what() << '\n';
            return std::nullopt;
        }
    };

    try {
        if (opts.batch) {
            std::optional<std::int64_t> first_stamp;
            std::int64_t last_stamp = 0;
            std::uint64_t consumed = 0;
            for (;;) {
                if (stop_requested(opts)) {
                    break;
                }
                if (auto m = mailbox.pop_for(20ms)) {
                    ++consumed;
                    if (auto pose = handle(*m)) {
                        if (!first_stamp) {
                            first_stamp = m->stamp_us;
                        }
                        last_stamp = m->stamp_us;
                        sim.advance_to(static_cast<double>(m->stamp_us - *first_stamp) * 1e-6);
                        sim.on_angles(m->stamp_us, *pose);
                        publish_state();
                    }
                    continue;
                }
                std::uint64_t expected = 0, skipped = 0;
                if (end.get(expected, skipped) && consumed >= expected) {
                    if (first_stamp) {
                        sim.advance_to(static_cast<double>(last_stamp - *first_stamp) * 1e-6 + cfg.settle_s);
                        publish_state();
                    }
                    sim.set_frames_skipped(skipped);
                    break;
                }
                if (!client.connected()) {
                    std::cerr << "agile_eye: broker connection lost\n";
                    stats.exit_code = 1;
                    break;
                }
            }
        } else {
            sim.set_recording(!opts.out_dir.empty());
            const auto dt = std::chrono::duration_cast<Clock::duration>(
                std::chrono::duration<double>(cfg.control_dt));
            auto next = Clock::now();
            while (!stop_requested(opts)) {
                if (!client.connected()) {
                    std::cerr << "agile_eye: broker connection lost\n";
                    stats.exit_code = 1;
                    break;
                }
                while (auto m = mailbox.try_pop()) {
                    if (auto pose = handle(*m)) {
                        sim.on_angles(m->stamp_us, *pose);
                    }
                }
                sim.tick();
                if (sim.report().control_ticks % static_cast<std::uint64_t>(cfg.joint_state_every) == 0) {
                    publish_state();
                }
                next += dt;
                std::this_thread::sleep_until(next);
            }
        }
    } catch (const Error& e) {
        std::cerr << "agile_eye: " << e.what() << '\n';
        stats.exit_code = 1;
    }

    stats.report = sim.report();
    if (!opts.out_dir.empty()) {
        try {
            write_report(opts.out_dir, {stats.report, sim.rows()});
        } catch (const Error& e) {
            std::cerr << "agile_eye: " << e.what() << '\n';
            stats.exit_code = 1;
        }
    }
    client.close();
    return stats;
}

std::size_t replay(bus::Client& client, const std::vector<LandmarkFrame>& frames, double speed)
{
    client.advertise(topics::kLandmarks);
    client.advertise(topics::kLandmarksEnd);
    const auto wall0 = Clock::now();
    const std::int64_t stamp0 = frames.empty() ? 0 : frames.front().stamp_us;
    for (const LandmarkFrame& f : frames) {
        if (speed > 0.0) {
            const auto offset = std::chrono::duration<double, std::micro>(
                static_cast<double>(f.stamp_us - stamp0) / speed);
            std::this_thread::sleep_until(wall0 + std::chrono::duration_cast<Clock::duration>(offset));
        }
        client.publish(topics::kLandmarks, to_json(f), f.stamp_us);
    }
    client.publish(topics::kLandmarksEnd, {{"frames", frames.size()}}, 0);
    return frames.size();
}

// ---------------------------------------------------------------------------
// run

namespace {

class ChildProcess {
public:
    ChildProcess(const std::filesystem::path& exe, std::vector<std::string> args)
    {
        args.insert(args.begin(), exe.string());
        std::vector<char*> argv;
        for (auto& a : args) {
            argv.push_back(a.data());
        }
        argv.push_back(nullptr);
        if (::posix_spawn(&pid_, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
            throw Error(ErrorCode::IoError, "cannot launch " + exe.string());
        }
    }

    ~ChildProcess()
    {
        if (pid_ > 0 && !status_) {
            ::kill(pid_, SIGTERM);
            int st = 0;
            ::waitpid(pid_, &st, 0);
        }
    }

    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    /// Exit code, or nullopt if still running at the deadline.
    std::optional<int> wait_until(Clock::time_point deadline)
    {
        while (!status_) {
            int st = 0;
            const pid_t r = ::waitpid(pid_, &st, WNOHANG);
            if (r == pid_) {
                status_ = WIFEXITED(st) ? WEXITSTATUS(st) : 128 + WTERMSIG(st);
                break;
            }
            if (Clock::now() >= deadline) {
                return std::nullopt;
            }
            std::this_thread::sleep_for(5ms);
        }
        return status_;
    }

private:
    pid_t pid_ = -1;
    std::optional<int> status_;
};

}  // namespace

int run_pipeline(const RunOptions& opts)
{
    const auto wall0 = Clock::now();
    const std::vector<LandmarkFrame> frames = read_trace(opts.trace);
    // Fail here rather than in the children.
    const FaceAnglesProcessor check(load_config(opts.config));

    bus::Broker broker({"127.0.0.1", 0});
    broker.start();
    const std::string addr = "127.0.0.1:" + std::to_string(broker.port());

    std::mutex mu;
    std::condition_variable cv;
    std::set<std::string> ready;
    bus::Client orchestrator(addr);
    orchestrator.subscribe(topics::kNodeStatus, [&](const bus::Message& m) {
        {
            std::lock_guard lock(mu);
            ready.insert(m.payload.value("node", std::string{}));
        }
        cv.notify_all();
    }, 64);

    const std::string config = opts.config.string();
    ChildProcess face(opts.executable, {"face-angles", "--config", config, "--broker", addr, "--batch"});
    ChildProcess eye(opts.executable, {"agile-eye", "--config", config, "--broker", addr, "--batch",
                                       "--out", opts.out_dir.string()});

    const auto ready_deadline = Clock::now() + 15s;
    for (;;) {
        {
            std::unique_lock lock(mu);
            if (cv.wait_for(lock, 20ms, [&] { return ready.count("face_angles") && ready.count("agile_eye"); })) {
                break;
            }
        }
        if (face.wait_until(Clock::now()) || eye.wait_until(Clock::now()) || Clock::now() > ready_deadline) {
            std::cerr << "run: nodes did not come up\n";
            return 1;
        }
    }

    replay(orchestrator, frames, opts.speed);

    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(opts.timeout_s));
    const auto eye_code = eye.wait_until(deadline);
    const auto face_code = face.wait_until(deadline);
    orchestrator.close();
    broker.stop();

    if (!eye_code || !face_code) {
        std::cerr << "run: timed out waiting for nodes\n";
        return 1;
    }

    const double wall = std::chrono::duration<double>(Clock::now() - wall0).count();
    std::ofstream timing(opts.out_dir / "timing.json");
    timing << nlohmann::ordered_json{{"wall_clock_s", wall}, {"frames", frames.size()}}.dump(2) << '\n';

    return (*eye_code == 0 && *face_code == 0) ? 0 : 1;
}

}  // namespace agile_head
