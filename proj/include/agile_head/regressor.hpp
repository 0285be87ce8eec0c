#pragma once

#include "agile_head/landmarks.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace agile_head {

enum class PoseAxis { Horizontal, Vertical };

std::string_view to_string(PoseAxis axis);
PoseAxis parse_axis(std::string_view s);

/// Landmarks centred on their centroid and divided by their RMS radial
/// distance, split into per-axis coordinate vectors.
struct NormalizedFeatures {
    Eigen::VectorXd x;
    Eigen::VectorXd y;

    const Eigen::VectorXd& axis(PoseAxis a) const { return a == PoseAxis::Horizontal ? x : y; }
};

/// Throws ErrorCode::DegenerateFrame when all landmarks coincide.
NormalizedFeatures normalize(const LandmarkFrame& f);

inline constexpr double kScoreLimit = 10.0;

struct LinearPoseModel {
    PoseAxis axis = PoseAxis::Horizontal;
    double w0 = 0.0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(kLandmarkCount);
    double lambda = 1e-3;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    double val_rmse = 0.0;
};

struct LabeledSample {
    LandmarkFrame frame;
    double horizontal = 0.0;
    double vertical = 0.0;

    double label(PoseAxis a) const { return a == PoseAxis::Horizontal ? horizontal : vertical; }
};

using LabeledDataset = std::vector<LabeledSample>;

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Seeded shuffle, then the first floor(fraction * n) indices train.
SplitIndices split_dataset(std::size_t n, double train_fraction, std::uint64_t seed);

struct FitOptions {
    double lambda = 1e-3;
    double train_fraction = 0.8;
    std::uint64_t seed = 20220101;
};

/// Ridge regression with an unpenalised bias on the training split; records
/// validation RMSE on the rest. Throws ErrorCode::InsufficientData with fewer
/// than two training samples.
LinearPoseModel fit(const LabeledDataset& d, PoseAxis axis, const FitOptions& opts = {});

double predict_raw(const LinearPoseModel& m, const NormalizedFeatures& features);

/// Score clamped to [-10, 10].
double predict(const LinearPoseModel& m, const LandmarkFrame& f);

/// Maps a score in [-10, 10] linearly onto [-limit, +limit].
double score_to_angle(double score, double limit);

/// {schema: "agile-head-model/1", axis, w0, w[468], lambda, seed, n_train, n_val, val_rmse}
nlohmann::json to_json(const LinearPoseModel& m);
LinearPoseModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const LinearPoseModel& m);
LinearPoseModel load_model(const std::filesystem::path& path);

/// Dataset directory: frames.jsonl plus labels.csv (index,horizontal,vertical).
LabeledDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const LabeledDataset& d);

}  // namespace agile_head
