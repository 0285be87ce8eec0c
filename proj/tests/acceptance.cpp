// One line per acceptance criterion; exit status is nonzero if any fails.
#include "agile_head/bus.hpp"
#include "agile_head/control.hpp"
#include "agile_head/facepose.hpp"
#include "agile_head/geometry.hpp"
#include "agile_head/kinematics.hpp"
#include "agile_head/pipeline.hpp"
#include "agile_head/regressor.hpp"
#include "agile_head/synthetic.hpp"
#include "agile_head/trajectory.hpp"
#include "support.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <sys/wait.h>
#include <thread>

using namespace agile_head;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail)
{
    fmt::print("{} {:<28} {}\n", ok ? "PASS" : "FAIL", name, detail);
    std::fflush(stdout);
    if (!ok) {
        ++failures;
    }
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename Pred>
bool eventually(Pred p, double timeout_s = 10.0)
{
    const auto t0 = Clock::now();
    while (!p()) {
        if (seconds_since(t0) > timeout_s) {
            return false;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
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

void kinematics_round_trip()
{
    test_support::Gen g(1001);
    const double lim = deg2rad(15);
    double worst = 0.0;
    bool threw = false;
    const auto t0 = Clock::now();
    for (int i = 0; i < 10000; ++i) {
        const EulerZYX e = g.euler(lim);
        try {
            const EulerZYX r = fkp(ikp(e));
            worst = std::max({worst, std::abs(r.phi - e.phi), std::abs(r.theta - e.theta), std::abs(r.psi - e.psi)});
        } catch (const std::exception&) {
            threw = true;
        }
    }
    const double secs = seconds_since(t0);
    report(!threw && worst < 1e-7 && secs < 5.0, "kinematics-round-trip",
           fmt::format("10000 poses, max err {:.3g} rad (< 1e-7), {:.2f} s (< 5 s)", worst, secs));
}

void decoupling()
{
    // direct evaluation of the three closed forms
    const auto direct = [](double phi, double theta, double psi) {
        const double cf = std::cos(phi), sf = std::sin(phi), ct = std::cos(theta), st = std::sin(theta);
        const double cp = std::cos(psi), sp = std::sin(psi);
        return JointAngles{std::atan2(ct * sp, cf * cp + sf * st * sp), std::atan2(sf * sp + cf * st * cp, ct * cp), phi};
    };
    test_support::Gen g(1002);
    double off = 0.0, mismatch = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double a = g.uniform(-deg2rad(15), deg2rad(15));
        const JointAngles qphi = ikp({a, 0, 0}), qtheta = ikp({0, a, 0}), qpsi = ikp({0, 0, a});
        off = std::max({off, std::abs(qphi.theta1), std::abs(qphi.theta2), std::abs(qtheta.theta1),
                        std::abs(qtheta.theta3), std::abs(qpsi.theta2), std::abs(qpsi.theta3)});
        for (auto [q, d] : {std::pair{qphi, direct(a, 0, 0)}, std::pair{qtheta, direct(0, a, 0)},
                            std::pair{qpsi, direct(0, 0, a)}}) {
            for (int j = 0; j < 3; ++j) {
                mismatch = std::max(mismatch, std::abs(q[j] - d[j]));
            }
        }
    }
    report(off < 1e-12 && mismatch < 1e-12, "decoupling-at-reference",
           fmt::format("other joints max {:.3g} (< 1e-12), vs direct evaluation {:.3g}", off, mismatch));
}

void axis_triad()
{
    const auto& ax = head_axes();
    Mat3 b;
    b << ax.yaw, ax.roll, ax.pitch;
    const double ortho = (b.transpose() * b - Mat3::Identity()).cwiseAbs().maxCoeff();
    test_support::Gen g(1003);
    double fixed = 0.0;
    for (const Vec3* e : {&ax.yaw, &ax.roll, &ax.pitch}) {
        for (int i = 0; i < 1000; ++i) {
            fixed = std::max(fixed, (axis_angle(*e, g.uniform(-std::numbers::pi, std::numbers::pi)) * *e - *e).norm());
        }
    }
    report(ortho < 1e-12 && fixed < 1e-9, "axis-triad",
           fmt::format("orthonormality {:.3g} (< 1e-12), fixed-axis drift {:.3g} (< 1e-9)", ortho, fixed));
}

void profile_345()
{
    bool ok = s345(0.0) == 0.0 && s345(1.0) == 1.0;
    ok = ok && std::abs(s345_velocity(0.0)) < 1e-12 && std::abs(s345_velocity(1.0)) < 1e-12;
    ok = ok && std::abs(s345_acceleration(0.0)) < 1e-12 && std::abs(s345_acceleration(1.0)) < 1e-12;
    const double mid = s345(0.5);
    double peak = 0.0;
    bool monotone = true;
    for (int i = 0; i <= 100000; ++i) {
        const double t = i / 100000.0;
        peak = std::max(peak, s345_velocity(t));
        monotone = monotone && s345_velocity(t) >= -1e-12 && (i == 0 || s345(t) >= s345((i - 1) / 100000.0));
    }
    ok = ok && monotone && std::abs(mid - 0.5) < 1e-12 && std::abs(peak - 1.875) < 1e-12;
    report(ok, "345-profile",
           fmt::format("boundaries exact, monotone={}, S(0.5)={}, peak S'={:.15f}", monotone, mid, peak));
}

void closed_loop_step()
{
    // 15 degree joint step through the agile_eye control path: planner, PID, servo.
    const auto run = [] {
        const PipelineConfig cfg;
        ServoBank bank(cfg.pid, cfg.servo);
        const JointAngles goal{deg2rad(15), 0, 0};
        const Trajectory345 tr({}, goal, move_duration({}, goal, cfg.timing));
        std::vector<double> pos;
        for (int k = 1; k <= 600; ++k) {
            const auto s = tr.at(k * cfg.control_dt);
            JointAngles ff;
            for (int j = 0; j < 3; ++j) {
                ff[j] = s.velocity[j] + (cfg.servo.tau_m - cfg.control_dt) * s.acceleration[j];
            }
            bank.step(s.position, ff, cfg.control_dt);
            pos.push_back(bank.position().theta1);
        }
        return pos;
    };
    const auto a = run();
    const auto b = run();
    const double goal = deg2rad(15);
    double settle = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::abs(a[k] - goal) > deg2rad(0.2)) {
            settle = static_cast<double>(k + 1) * 0.005;
        }
        peak = std::max(peak, a[k]);
    }
    const double overshoot = std::max(0.0, (peak - goal) / goal);

    // Same step fed straight to the PID with no planner.
    PidState pid;
    ServoPlant plant{0.0, 0.0, deg2rad(300), 0.02};
    double raw_settle = 0.0, raw_peak = 0.0;
    for (int k = 1; k <= 600; ++k) {
        const auto o = pid_step(PidGains{}, pid, goal, plant.position, 0.005);
        pid = o.state;
        plant = servo_step(plant, o.command, 0.005);
        if (std::abs(plant.position - goal) > deg2rad(0.2)) {
            raw_settle = k * 0.005;
        }
        raw_peak = std::max(raw_peak, plant.position);
    }
    const double raw_overshoot = std::max(0.0, (raw_peak - goal) / goal);
    const bool ok = settle <= 1.5 && overshoot <= 0.05 && raw_settle <= 1.5 && raw_overshoot <= 0.05 && a == b;
    report(ok, "closed-loop-step",
           fmt::format("planned: settle {:.3f} s, overshoot {:.2f}%; raw: settle {:.3f} s, overshoot {:.2f}%; "
                       "deterministic={}",
                       settle, 100 * overshoot, raw_settle, 100 * raw_overshoot, a == b));
}

void shoelace()
{
    test_support::Gen g(1004);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const int n = g.integer(3, 24);
        std::vector<double> ang;
        for (int k = 0; k < n; ++k) {
            ang.push_back(g.uniform(0, 2 * std::numbers::pi));
        }
        std::sort(ang.begin(), ang.end());
        const double cx = g.uniform(-5, 5), cy = g.uniform(-5, 5), rx = g.uniform(0.1, 3), ry = g.uniform(0.1, 3);
        std::vector<Eigen::Vector2d> poly;
        for (double t : ang) {
            poly.emplace_back(cx + rx * std::cos(t), cy + ry * std::sin(t));
        }
        double fan = 0.0;
        for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
            const Eigen::Vector2d u = poly[k] - poly[0], v = poly[k + 1] - poly[0];
            fan += 0.5 * std::abs(u.x() * v.y() - u.y() * v.x());
        }
        worst = std::max(worst, std::abs(polygon_area(poly) - fan));
    }
    const std::vector<Eigen::Vector2d> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, tri{{0, 0}, {1, 0}, {0, 1}};
    const bool ok = worst < 1e-12 && polygon_area(sq) == 1.0 && polygon_area(tri) == 0.5;
    report(ok, "shoelace",
           fmt::format("1000 convex polygons max err {:.3g} (< 1e-12), square {}, triangle {}", worst,
                       polygon_area(sq), polygon_area(tri)));
}

void regression_recovery()
{
    test_support::Gen g(1005);
    Eigen::VectorXd w(kLandmarkCount);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        w[i] = g.uniform(-0.05, 0.05);
    }
    const double w0 = 0.7;
    LabeledDataset d;
    for (int i = 0; i < 1000; ++i) {
        LabeledSample s;
        s.frame = g.frame(i);
        s.horizontal = w0 + w.dot(normalize(s.frame).x);
        d.push_back(std::move(s));
    }
    FitOptions opts;
    opts.lambda = 1e-9;
    const auto m = fit(d, PoseAxis::Horizontal, opts);
    const auto split = split_dataset(1000, 0.8, opts.seed);
    const bool sizes = m.n_train == 800 && m.n_val == 200 && split.train.size() == 800 && split.validation.size() == 200;
    const bool mapping = score_to_angle(10.0, deg2rad(15)) == deg2rad(15) && score_to_angle(-10.0, deg2rad(15)) == -deg2rad(15);
    report(m.val_rmse < 1e-6 && sizes && mapping, "regression-recovery",
           fmt::format("val RMSE {:.3g} (< 1e-6), split {}/{}, score 10 -> {:.12g} deg", m.val_rmse, m.n_train, m.n_val,
                       rad2deg(score_to_angle(10.0, deg2rad(15)))));
}

void pose_estimator()
{
    const auto& mesh = test_support::canonical_mesh();
    double single = 0.0, combined = 0.0;
    for (int d = -15; d <= 15; ++d) {
        const double a = deg2rad(d);
        single = std::max({single, std::abs(estimate_roll(render_frame(mesh, {a, 0, 0}, {}, 0)) - a),
                           std::abs(estimate_yaw(render_frame(mesh, {0, a, 0}, {}, 0)) - a),
                           std::abs(estimate_pitch(render_frame(mesh, {0, 0, a}, {}, 0)) - a)});
    }
    test_support::Gen g(1006);
    double mirror = 0.0, shift = 0.0, scale = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const FaceAngles t{deg2rad(g.uniform(-15, 15)), deg2rad(g.uniform(-15, 15)), deg2rad(g.uniform(-15, 15))};
        const auto f = render_frame(mesh, t, {}, 0);
        const FaceAngles e = estimate_angles(f);
        combined = std::max({combined, std::abs(e.roll - t.roll), std::abs(e.yaw - t.yaw), std::abs(e.pitch - t.pitch)});

        auto m = f, tr = f, sc = f;
        const Vec3 off(g.uniform(-0.2, 0.2), g.uniform(-0.2, 0.2), g.uniform(-0.2, 0.2));
        const Vec3 c(g.uniform(0, 1), g.uniform(0, 1), 0.0);
        const double s = g.uniform(0.5, 2.0);
        for (std::size_t k = 0; k < f.points.size(); ++k) {
            m.points[k].x() = 1.0 - f.points[k].x();
            tr.points[k] = f.points[k] + off;
            sc.points[k] = c + s * (f.points[k] - c);
        }
        const FaceAngles em = estimate_angles(m), et = estimate_angles(tr), es = estimate_angles(sc);
        mirror = std::max({mirror, std::abs(em.roll + e.roll), std::abs(em.yaw + e.yaw), std::abs(em.pitch - e.pitch)});
        shift = std::max({shift, std::abs(et.roll - e.roll), std::abs(et.yaw - e.yaw), std::abs(et.pitch - e.pitch)});
        scale = std::max({scale, std::abs(es.roll - e.roll), std::abs(es.yaw - e.yaw), std::abs(es.pitch - e.pitch)});
    }
    const double inv = std::max({mirror, shift, scale});
    const bool ok = rad2deg(single) < 2.0 && rad2deg(combined) < 2.0 && inv < 1e-12;
    report(ok, "pose-estimator-oracle",
           fmt::format("single-axis max err {:.3f} deg, combined {:.3f} deg (< 2); invariance residual {:.3g}",
                       rad2deg(single), rad2deg(combined), inv));
}

void bus_checks()
{
    // codec
    test_support::Gen g(1007);
    int codec_bad = 0;
    for (int i = 0; i < 1000; ++i) {
        bus::Message m;
        m.topic = "t" + std::to_string(g.integer(0, 999)) + "/x_" + std::to_string(i);
        m.seq = g.u64();
        m.stamp_us = static_cast<std::int64_t>(g.u64() >> 2);
        m.payload = {{"v", g.uniform(-1e9, 1e9)}, {"s", std::string(static_cast<std::size_t>(g.integer(0, 40)), 'q')},
                     {"a", {g.integer(-5, 5), nullptr, true}}};
        const std::string frame = bus::encode(m);
        if (!(bus::decode(std::string_view(frame)) == m)) {
            ++codec_bad;
        }
    }

    bus::Broker broker({"127.0.0.1", 0});
    broker.start();
    const std::string addr = "127.0.0.1:" + std::to_string(broker.port());

    // FIFO with two subscribers
    std::mutex mu;
    std::vector<std::uint64_t> s1, s2;
    bus::Client c1(addr), c2(addr), pub(addr);
    c1.subscribe("fifo", [&](const bus::Message& m) { std::lock_guard l(mu); s1.push_back(m.seq); }, 4096);
    c2.subscribe("fifo", [&](const bus::Message& m) { std::lock_guard l(mu); s2.push_back(m.seq); }, 4096);
    eventually([&] { return broker.subscriber_count("fifo") == 2; });
    for (int i = 0; i < 1000; ++i) {
        pub.publish("fifo", {{"i", i}}, i);
    }
    eventually([&] { std::lock_guard l(mu); return s1.size() == 1000 && s2.size() == 1000; });
    bool fifo = true;
    {
        std::lock_guard l(mu);
        fifo = s1.size() == 1000 && s2.size() == 1000;
        for (std::size_t k = 0; fifo && k < 1000; ++k) {
            fifo = s1[k] == k + 1 && s2[k] == k + 1;
        }
    }

    // latest-wins: a stalled handler with capacity 16 sees the first message and the newest 16
    std::mutex gate;
    gate.lock();
    std::atomic<bool> entered{false};
    std::vector<std::uint64_t> slow;
    bus::Client c3(addr);
    c3.subscribe("slow", [&](const bus::Message& m) {
        if (!entered.exchange(true)) {
            std::lock_guard wait(gate);
        }
        std::lock_guard l(mu);
        slow.push_back(m.seq);
    }, 16);
    eventually([&] { return broker.subscriber_count("slow") == 1; });
    pub.publish("slow", {}, 0);
    eventually([&] { return entered.load(); });
    for (int i = 2; i <= 100; ++i) {
        pub.publish("slow", {}, i);
    }
    eventually([&] { return c3.received("slow") == 100; });
    gate.unlock();
    eventually([&] { std::lock_guard l(mu); return slow.size() == 17; });
    bool latest = false;
    {
        std::lock_guard l(mu);
        latest = slow.size() == 17 && slow.front() == 1;
        for (std::size_t k = 1; latest && k < slow.size(); ++k) {
            latest = slow[k] == 84 + k;
        }
    }

    // soak
    const int n = 10000;
    std::size_t got = 0;
    std::uint64_t h_in = 0, h_out = 0;
    bus::Client c4(addr);
    c4.subscribe("soak", [&](const bus::Message& m) {
        std::lock_guard l(mu);
        h_out = h_out * 1099511628211ull ^ std::hash<std::string>{}(m.payload.dump());
        ++got;
    }, n);
    eventually([&] { return broker.subscriber_count("soak") == 1; });
    const auto t0 = Clock::now();
    for (int i = 0; i < n; ++i) {
        const nlohmann::ordered_json p{{"i", i}, {"v", g.uniform(-1, 1)}};
        h_in = h_in * 1099511628211ull ^ std::hash<std::string>{}(p.dump());
        pub.publish("soak", p, i);
    }
    eventually([&] { std::lock_guard l(mu); return got == static_cast<std::size_t>(n); }, 30.0);
    const double secs = seconds_since(t0);
    bool soak = false;
    {
        std::lock_guard l(mu);
        soak = got == static_cast<std::size_t>(n) && h_in == h_out && secs < 5.0;
    }
    report(codec_bad == 0 && fifo && latest && soak, "bus",
           fmt::format("codec 1000 ok={}, fifo={}, latest-wins={}, soak 10000 msgs intact={} in {:.2f} s (< 5 s)",
                       codec_bad == 0, fifo, latest, soak, secs));
}

int run_cli(const std::string& args)
{
    const std::string cmd = test_support::cli_path().string() + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

void end_to_end()
{
    const auto dir = test_support::scratch_dir("acceptance");
    const auto trace = test_support::data_dir() / "traces" / "smooth_300.jsonl";
    const auto cfg_path = test_support::data_dir() / "configs" / "default.json";
    const std::string base = "run --trace " + trace.string() + " --config " + cfg_path.string() + " --out ";

    const auto t0 = Clock::now();
    const int rc1 = run_cli(base + (dir / "a").string());
    const double secs1 = seconds_since(t0);
    const auto t1 = Clock::now();
    const int rc2 = run_cli(base + (dir / "b").string());
    const double secs2 = seconds_since(t1);

    const std::string csv_a = slurp(dir / "a" / "trajectory.csv"), csv_b = slurp(dir / "b" / "trajectory.csv");
    const std::string rep_a = slurp(dir / "a" / "report.json"), rep_b = slurp(dir / "b" / "report.json");
    const bool identical = !csv_a.empty() && csv_a == csv_b && !rep_a.empty() && rep_a == rep_b;

    double rms = 1e9;
    std::size_t rows = 0, outside = 0;
    try {
        const auto rep = nlohmann::json::parse(rep_a);
        rms = std::max({rep["rms_error_deg"]["roll"].get<double>(), rep["rms_error_deg"]["pitch"].get<double>(),
                        rep["rms_error_deg"]["yaw"].get<double>()});
        const WorkspaceLimits w = load_config(cfg_path).workspace;
        std::istringstream in(csv_a);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            std::vector<double> c;
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) {
                c.push_back(std::stod(cell));
            }
            ++rows;
            const HeadPose p{deg2rad(c.at(7)), deg2rad(c.at(8)), deg2rad(c.at(9))};
            if (!within_workspace(p, w, 1e-9)) {
                ++outside;
            }
        }
    } catch (const std::exception&) {
    }
    const bool ok = rc1 == 0 && rc2 == 0 && identical && rms < 0.5 && rows > 0 && outside == 0 &&
                    std::max(secs1, secs2) < 30.0;
    report(ok, "end-to-end-batch",
           fmt::format("exit {}/{}, identical={}, max RMS {:.3f} deg (< 0.5), {} rows outside workspace of {}, "
                       "{:.2f}/{:.2f} s (< 30 s)",
                       rc1, rc2, identical, rms, outside, rows, secs1, secs2));
    std::filesystem::remove_all(dir);
}

}  // namespace

int main()
{
    const std::pair<const char*, void (*)()> checks[] = {
        {"kinematics-round-trip", kinematics_round_trip},
        {"decoupling-at-reference", decoupling},
        {"axis-triad", axis_triad},
        {"345-profile", profile_345},
        {"closed-loop-step", closed_loop_step},
        {"shoelace", shoelace},
        {"regression-recovery", regression_recovery},
        {"pose-estimator-oracle", pose_estimator},
        {"bus", bus_checks},
        {"end-to-end-batch", end_to_end},
    };
    for (const auto& [name, fn] : checks) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(false, name, std::string("threw: ") + e.what());
        }
    }
    fmt::print("{} of {} criteria passed\n", std::size(checks) - static_cast<std::size_t>(failures), std::size(checks));
    return failures == 0 ? 0 : 1;
}
