#pragma once

#include "agile_head/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace agile_head {

inline constexpr std::size_t kLandmarkCount = 468;

/// One face observation: x, y normalised by the frame width and height,
/// z a relative depth on the same scale as x.
struct LandmarkFrame {
    std::int64_t stamp_us = 0;
    int width = 640;
    int height = 480;
    std::vector<Vec3> points;

    /// Point i in pixel-consistent units (x*w, y*h, z*w), so slopes computed
    /// from differences are independent of the frame aspect ratio.
    Vec3 pixel(std::size_t i) const
    {
        const Vec3& p = points[i];
        return {p.x() * width, p.y() * height, p.z() * width};
    }

    bool operator==(const LandmarkFrame&) const = default;
};

/// Throws ErrorCode::InvalidFrame if the frame breaks its invariants.
void validate(const LandmarkFrame& f);

/// Wire/trace representation: {"stamp_us", "w", "h", "pts": [[x,y,z] x 468]}.
nlohmann::ordered_json to_json(const LandmarkFrame& f);
LandmarkFrame frame_from_json(const nlohmann::ordered_json& j);

/// Reads a JSONL trace. Blank lines are skipped; any other bad line raises
/// ErrorCode::ParseError naming the 1-based line number.
std::vector<LandmarkFrame> read_trace(const std::filesystem::path& path);
void write_trace(const std::filesystem::path& path, const std::vector<LandmarkFrame>& frames);

}  // namespace agile_head
