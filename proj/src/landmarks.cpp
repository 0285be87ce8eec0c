#include "agile_head/landmarks.hpp"

#include "agile_head/error.hpp"

#include <cmath>
#include <fstream>

namespace agile_head {

void validate(const LandmarkFrame& f)
{
    if (f.points.size() != kLandmarkCount) {
        throw Error(ErrorCode::InvalidFrame,
                    "expected 468 landmarks, got " + std::to_string(f.points.size()));
    }
    if (f.stamp_us < 0) {
        throw Error(ErrorCode::InvalidFrame, "negative timestamp");
    }
    if (f.width <= 0 || f.height <= 0) {
        throw Error(ErrorCode::InvalidFrame, "frame size must be positive");
    }
    for (std::size_t i = 0; i < f.points.size(); ++i) {
        const Vec3& p = f.points[i];
        if (!p.allFinite() || p.x() < -0.5 || p.x() > 1.5 || p.y() < -0.5 || p.y() > 1.5) {
            throw Error(ErrorCode::InvalidFrame, "landmark " + std::to_string(i) + " out of range");
        }
    }
}

nlohmann::ordered_json to_json(const LandmarkFrame& f)
{
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const Vec3& p : f.points) {
        pts.push_back({p.x(), p.y(), p.z()});
    }
    return {{"stamp_us", f.stamp_us}, {"w", f.width}, {"h", f.height}, {"pts", std::move(pts)}};
}

LandmarkFrame frame_from_json(const nlohmann::ordered_json& j)
{
    LandmarkFrame f;
    try {
        f.stamp_us = j.at("stamp_us").get<std::int64_t>();
        f.width = j.at("w").get<int>();
        f.height = j.at("h").get<int>();
        const auto& pts = j.at("pts");
        if (!pts.is_array()) {
            throw Error(ErrorCode::InvalidFrame, "pts is not an array");
        }
        f.points.reserve(pts.size());
        for (const auto& p : pts) {
            if (!p.is_array() || p.size() != 3) {
                throw Error(ErrorCode::InvalidFrame, "landmark is not an [x,y,z] triple");
            }
            f.points.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidFrame, e.what());
    }
    validate(f);
    return f;
}

std::vector<LandmarkFrame> read_trace(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open trace " + path.string());
    }
    std::vector<LandmarkFrame> frames;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            frames.push_back(frame_from_json(nlohmann::ordered_json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::ParseError,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return frames;
}

void write_trace(const std::filesystem::path& path, const std::vector<LandmarkFrame>& frames)
{
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write trace " + path.string());
    }
    for (const auto& f : frames) {
        out << to_json(f).dump() << '\n';
    }
}

}  // namespace agile_head
