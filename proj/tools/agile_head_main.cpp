#include "agile_head/bus.hpp"
#include "agile_head/config.hpp"
#include "agile_head/error.hpp"
#include "agile_head/landmarks.hpp"
#include "agile_head/pipeline.hpp"
#include "agile_head/regressor.hpp"
#include "agile_head/synthetic.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <iostream>
#include <random>
#include <thread>
#include <unistd.h>

#ifndef AGILE_HEAD_DATA_DIR
#define AGILE_HEAD_DATA_DIR "data"
#endif

namespace ah = agile_head;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void install_signal_handlers()
{
    struct sigaction sa {};
    sa.sa_handler = on_signal;
    sigemptyset(&sa.sa_mask);
    sigaction(SIGINT, &sa, nullptr);
    sigaction(SIGTERM, &sa, nullptr);
}

ah::PipelineConfig config_or_default(const std::string& path)
{
    return path.empty() ? ah::PipelineConfig{} : ah::load_config(path);
}

// --broker beats AGILE_HEAD_BROKER beats the config file.
std::string resolve_broker(const std::string& flag, const ah::PipelineConfig& cfg)
{
    return flag.empty() ? ah::bus::broker_address_from_env(cfg.broker) : flag;
}

std::filesystem::path self_executable(const char* argv0)
{
    std::error_code ec;
    auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
    return ec ? std::filesystem::absolute(argv0) : p;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Agile-eye robotic head: face angles to a simulated spherical parallel robot"};
    app.require_subcommand(1);

    // broker
    auto* broker_cmd = app.add_subcommand("broker", "Run the topic broker");
    int port = ah::bus::kDefaultPort;
    std::string host = "127.0.0.1";
    broker_cmd->add_option("--port", port, "TCP port (0 = ephemeral)");
    broker_cmd->add_option("--host", host, "Bind address");

    // nodes
    std::string config_path, broker_flag, out_dir;
    bool batch = false;
    auto* face_cmd = app.add_subcommand("face-angles", "Run the face_angles node");
    face_cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
    face_cmd->add_option("--broker", broker_flag, "Broker HOST:PORT");
    face_cmd->add_flag("--batch", batch, "Lossless queues, exit after end of stream");

    auto* eye_cmd = app.add_subcommand("agile-eye", "Run the agile_eye node");
    eye_cmd->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
    eye_cmd->add_option("--broker", broker_flag, "Broker HOST:PORT");
    eye_cmd->add_flag("--batch", batch, "Clock follows message stamps, exit after end of stream");
    eye_cmd->add_option("--out", out_dir, "Write report.json and trajectory.csv here");

    // replay
    std::string trace_path;
    double speed = 1.0;
    auto* replay_cmd = app.add_subcommand("replay", "Publish a landmark trace on the bus");
    replay_cmd->add_option("--trace", trace_path, "Trace (JSONL)")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--speed", speed, "Playback speed factor (0 = as fast as possible)")
        ->check(CLI::NonNegativeNumber);
    replay_cmd->add_option("--broker", broker_flag, "Broker HOST:PORT");

    // run
    double run_speed = 0.0;
    auto* run_cmd = app.add_subcommand("run", "Broker + both nodes + replay, batch mode");
    run_cmd->add_option("--trace", trace_path, "Trace (JSONL)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out_dir, "Output directory")->required();
    run_cmd->add_option("--speed", run_speed, "Playback speed factor (0 = as fast as possible)")
        ->check(CLI::NonNegativeNumber);

    // train
    std::string dataset_dir, axis_name, model_out;
    ah::FitOptions fit_opts;
    auto* train_cmd = app.add_subcommand("train", "Fit a linear pose model");
    train_cmd->add_option("--dataset", dataset_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    train_cmd->add_option("--axis", axis_name, "horizontal|vertical")
        ->required()
        ->check(CLI::IsMember({"horizontal", "vertical"}));
    train_cmd->add_option("--out", model_out, "Model JSON")->required();
    train_cmd->add_option("--lambda", fit_opts.lambda, "Ridge strength")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--seed", fit_opts.seed, "Split seed");

    // fixtures
    std::string mesh_path = std::string(AGILE_HEAD_DATA_DIR) + "/canonical_face_mesh.json";
    std::string synth_out;
    int frames = 300;
    double fps = 30.0;
    auto* synth_trace_cmd = app.add_subcommand("synth-trace", "Render a smooth synthetic landmark trace");
    synth_trace_cmd->add_option("--mesh", mesh_path, "Canonical mesh")->check(CLI::ExistingFile);
    synth_trace_cmd->add_option("--frames", frames, "Frame count")->check(CLI::PositiveNumber);
    synth_trace_cmd->add_option("--fps", fps, "Frame rate")->check(CLI::PositiveNumber);
    synth_trace_cmd->add_option("--out", synth_out, "Trace (JSONL)")->required();

    std::uint64_t synth_seed = 7;
    double synth_limit_deg = 15.0;
    auto* synth_ds_cmd = app.add_subcommand("synth-dataset", "Render a labeled synthetic dataset");
    synth_ds_cmd->add_option("--mesh", mesh_path, "Canonical mesh")->check(CLI::ExistingFile);
    synth_ds_cmd->add_option("--frames", frames, "Sample count")->check(CLI::PositiveNumber);
    synth_ds_cmd->add_option("--seed", synth_seed, "RNG seed");
    synth_ds_cmd->add_option("--limit-deg", synth_limit_deg, "Angle for score 10")->check(CLI::PositiveNumber);
    synth_ds_cmd->add_option("--out", synth_out, "Dataset directory")->required();

    auto* print_cfg_cmd = app.add_subcommand("print-default-config", "Print the default config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (broker_cmd->parsed()) {
            install_signal_handlers();
            ah::bus::Broker broker({host, static_cast<std::uint16_t>(port)});
            broker.start();
            std::cerr << "broker listening on " << host << ':' << broker.port() << '\n';
            while (!g_stop) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
            }
            broker.stop();
            return 0;
        }
        if (face_cmd->parsed() || eye_cmd->parsed()) {
            install_signal_handlers();
            const auto cfg = config_or_default(config_path);
            ah::NodeOptions opts;
            opts.broker = resolve_broker(broker_flag, cfg);
            opts.batch = batch;
            opts.out_dir = out_dir;
            opts.stop = &g_stop;
            if (face_cmd->parsed()) {
                return ah::run_face_angles_node(cfg, opts).exit_code;
            }
            return ah::run_agile_eye_node(cfg, opts).exit_code;
        }
        if (replay_cmd->parsed()) {
            const auto trace = ah::read_trace(trace_path);
            ah::bus::Client client(resolve_broker(broker_flag, ah::PipelineConfig{}));
            const auto n = ah::replay(client, trace, speed);
            client.close();
            std::cerr << "replayed " << n << " frames\n";
            return 0;
        }
        if (run_cmd->parsed()) {
            ah::RunOptions opts;
            opts.trace = trace_path;
            opts.config = config_path;
            opts.out_dir = out_dir;
            opts.speed = run_speed;
            opts.executable = self_executable(argv[0]);
            std::filesystem::create_directories(opts.out_dir);
            return ah::run_pipeline(opts);
        }
        if (train_cmd->parsed()) {
            const auto data = ah::load_dataset(dataset_dir);
            const auto model = ah::fit(data, ah::parse_axis(axis_name), fit_opts);
            ah::save_model(model_out, model);
            std::cout << "n_train=" << model.n_train << " n_val=" << model.n_val
                      << " val_rmse=" << model.val_rmse << '\n';
            return 0;
        }
        if (synth_trace_cmd->parsed()) {
            const auto mesh = ah::load_mesh(mesh_path);
            ah::write_trace(synth_out, ah::synth_smooth_trace(mesh, frames, fps));
            return 0;
        }
        if (synth_ds_cmd->parsed()) {
            const auto mesh = ah::load_mesh(mesh_path);
            std::mt19937_64 rng(synth_seed);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            const double limit = ah::deg2rad(synth_limit_deg);
            const ah::Camera cam;
            ah::LabeledDataset data;
            for (int k = 0; k < frames; ++k) {
                ah::FaceAngles a;
                const double h = u(rng), v = u(rng);
                a.yaw = h * limit;
                a.pitch = v * limit;
                a.roll = 0.3 * u(rng) * limit;
                ah::LabeledSample s;
                s.frame = ah::render_frame(mesh, a, cam, k * 33333);
                s.horizontal = h * ah::kScoreLimit;
                s.vertical = v * ah::kScoreLimit;
                data.push_back(std::move(s));
            }
            ah::save_dataset(synth_out, data);
            return 0;
        }
        if (print_cfg_cmd->parsed()) {
            std::cout << ah::to_json(ah::PipelineConfig{}).dump(2) << '\n';
            return 0;
        }
    } catch (const ah::Error& e) {
        std::cerr << "agile-head: " << ah::to_string(e.code()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "agile-head: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
