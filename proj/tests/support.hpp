#pragma once

#include "agile_head/geometry.hpp"
#include "agile_head/kinematics.hpp"
#include "agile_head/landmarks.hpp"
#include "agile_head/synthetic.hpp"

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

namespace test_support {

inline std::filesystem::path data_dir() { return AGILE_HEAD_DATA_DIR; }
inline std::filesystem::path cli_path() { return AGILE_HEAD_CLI; }

inline const agile_head::FaceMesh& canonical_mesh()
{
    static const agile_head::FaceMesh mesh = agile_head::load_mesh(data_dir() / "canonical_face_mesh.json");
    return mesh;
}

inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("agile_head_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Small generator kit for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    std::uint64_t u64() { return rng_(); }

    agile_head::Vec3 vec3(double lim = 10.0) { return {uniform(-lim, lim), uniform(-lim, lim), uniform(-lim, lim)}; }

    agile_head::Vec3 unit3()
    {
        agile_head::Vec3 v;
        do {
            v = vec3(1.0);
        } while (v.norm() < 1e-3);
        return v.normalized();
    }

    agile_head::EulerZYX euler(double lim)
    {
        return {uniform(-lim, lim), uniform(-lim, lim), uniform(-lim, lim)};
    }

    // A frame of 468 points scattered inside the image.
    agile_head::LandmarkFrame frame(std::int64_t stamp = 0)
    {
        agile_head::LandmarkFrame f;
        f.stamp_us = stamp;
        f.points.resize(agile_head::kLandmarkCount);
        for (auto& p : f.points) {
            p = {uniform(0.2, 0.8), uniform(0.2, 0.8), uniform(-0.1, 0.1)};
        }
        return f;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace test_support
