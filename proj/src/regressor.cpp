#include "agile_head/regressor.hpp"

#include "agile_head/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace agile_head {

namespace {

constexpr std::string_view kModelSchema = "agile-head-model/1";

}  // namespace

std::string_view to_string(PoseAxis axis)
{
    return axis == PoseAxis::Horizontal ? "horizontal" : "vertical";
}

PoseAxis parse_axis(std::string_view s)
{
    if (s == "horizontal") {
        return PoseAxis::Horizontal;
    }
    if (s == "vertical") {
        return PoseAxis::Vertical;
    }
    throw Error(ErrorCode::ConfigError, "unknown axis '" + std::string(s) + "'");
}

NormalizedFeatures normalize(const LandmarkFrame& f)
{
    const auto n = static_cast<Eigen::Index>(f.points.size());
    NormalizedFeatures out;
    out.x.resize(n);
    out.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 p = f.pixel(static_cast<std::size_t>(i));
        out.x(i) = p.x();
        out.y(i) = p.y();
    }
    if (n == 0) {
        throw Error(ErrorCode::DegenerateFrame, "frame has no landmarks");
    }
    out.x.array() -= out.x.mean();
    out.y.array() -= out.y.mean();
    const double rms = std::sqrt((out.x.squaredNorm() + out.y.squaredNorm()) / static_cast<double>(n));
    if (!(rms >= 1e-9)) {
        throw Error(ErrorCode::DegenerateFrame, "landmarks coincide");
    }
    out.x /= rms;
    out.y /= rms;
    return out;
}

SplitIndices split_dataset(std::size_t n, double train_fraction, std::uint64_t seed)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return s;
}

LinearPoseModel fit(const LabeledDataset& d, PoseAxis axis, const FitOptions& opts)
{
    if (!(opts.lambda >= 0.0) || !(opts.train_fraction > 0.0 && opts.train_fraction <= 1.0)) {
        throw Error(ErrorCode::DomainError, "fit needs lambda >= 0 and fraction in (0, 1]");
    }
    const SplitIndices split = split_dataset(d.size(), opts.train_fraction, opts.seed);
    if (split.train.size() < 2) {
        throw Error(ErrorCode::InsufficientData,
                    "need at least 2 training samples, have " + std::to_string(split.train.size()));
    }

    const auto p = static_cast<Eigen::Index>(kLandmarkCount);
    const auto m = static_cast<Eigen::Index>(split.train.size());
    Eigen::MatrixXd x(m, p);
    Eigen::VectorXd y(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const LabeledSample& s = d[split.train[static_cast<std::size_t>(r)]];
        const NormalizedFeatures feat = normalize(s.frame);
        if (feat.x.size() != p) {
            throw Error(ErrorCode::InvalidFrame, "training frame must have 468 landmarks");
        }
        x.row(r) = feat.axis(axis).transpose();
        y(r) = s.label(axis);
    }

    // Centre so the bias stays unpenalised, then solve the ridge problem as an
    // augmented least-squares system [X; sqrt(lambda) I] w = [y; 0].
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    Eigen::MatrixXd aug(m + p, p);
    aug.topRows(m) = x.rowwise() - x_mean;
    aug.bottomRows(p) = std::sqrt(opts.lambda) * Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + p);
    rhs.head(m) = y.array() - y_mean;

    LinearPoseModel model;
    model.axis = axis;
    model.w = aug.householderQr().solve(rhs);
    model.w0 = y_mean - x_mean.dot(model.w);
    model.lambda = opts.lambda;
    model.seed = opts.seed;
    model.n_train = split.train.size();
    model.n_val = split.validation.size();

    double sq = 0.0;
    for (std::size_t i : split.validation) {
        const double err = predict(model, d[i].frame) - d[i].label(axis);
        sq += err * err;
    }
    model.val_rmse = split.validation.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(split.validation.size()));
    return model;
}

double predict_raw(const LinearPoseModel& m, const NormalizedFeatures& features)
{
    return m.w0 + m.w.dot(features.axis(m.axis));
}

double predict(const LinearPoseModel& m, const LandmarkFrame& f)
{
    return std::clamp(predict_raw(m, normalize(f)), -kScoreLimit, kScoreLimit);
}

double score_to_angle(double score, double limit)
{
    if (!(limit > 0.0)) {
        throw Error(ErrorCode::DomainError, "angle limit must be positive");
    }
    return std::clamp(score, -kScoreLimit, kScoreLimit) / kScoreLimit * limit;
}

nlohmann::json to_json(const LinearPoseModel& m)
{
    return {{"schema", kModelSchema},
            {"axis", to_string(m.axis)},
            {"w0", m.w0},
            {"w", std::vector<double>(m.w.data(), m.w.data() + m.w.size())},
            {"lambda", m.lambda},
            {"seed", m.seed},
            {"n_train", m.n_train},
            {"n_val", m.n_val},
            {"val_rmse", m.val_rmse}};
}

LinearPoseModel model_from_json(const nlohmann::json& j)
{
    LinearPoseModel m;
    try {
        if (j.at("schema").get<std::string>() != kModelSchema) {
            throw Error(ErrorCode::ParseError, "unsupported model schema");
        }
        m.axis = parse_axis(j.at("axis").get<std::string>());
        m.w0 = j.at("w0").get<double>();
        const auto w = j.at("w").get<std::vector<double>>();
        if (w.size() != kLandmarkCount) {
            throw Error(ErrorCode::ParseError, "model must carry 468 weights");
        }
        m.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        m.lambda = j.at("lambda").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.n_train = j.at("n_train").get<std::size_t>();
        m.n_val = j.at("n_val").get<std::size_t>();
        m.val_rmse = j.at("val_rmse").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what());
    }
    if (!std::isfinite(m.w0) || !m.w.allFinite()) {
        throw Error(ErrorCode::ParseError, "model weights must be finite");
    }
    return m;
}

void save_model(const std::filesystem::path& path, const LinearPoseModel& m)
{
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write model " + path.string());
    }
    out << to_json(m).dump(2) << '\n';
}

LinearPoseModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open model " + path.string());
    }
    try {
        return model_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

LabeledDataset load_dataset(const std::filesystem::path& dir)
{
    const auto frames = read_trace(dir / "frames.jsonl");
    std::ifstream in(dir / "labels.csv");
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + (dir / "labels.csv").string());
    }
    LabeledDataset d(frames.size());
    std::vector<bool> seen(frames.size(), false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.rfind("index", 0) == 0) {
            continue;
        }
        std::istringstream row(line);
        std::string a, b, c;
        std::size_t index = 0;
        double h = 0.0, v = 0.0;
        try {
            if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
                throw std::invalid_argument("expected 3 columns");
            }
            index = std::stoul(a);
            h = std::stod(b);
            v = std::stod(c);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::ParseError, "labels.csv:" + std::to_string(lineno) + ": " + e.what());
        }
        if (index >= frames.size() || std::abs(h) > kScoreLimit || std::abs(v) > kScoreLimit) {
            throw Error(ErrorCode::ParseError,
                        "labels.csv:" + std::to_string(lineno) + ": index or label out of range");
        }
        d[index] = {frames[index], h, v};
        seen[index] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw Error(ErrorCode::ParseError, "labels.csv does not cover every frame");
    }
    return d;
}

void save_dataset(const std::filesystem::path& dir, const LabeledDataset& d)
{
    std::filesystem::create_directories(dir);
    std::vector<LandmarkFrame> frames;
    frames.reserve(d.size());
    for (const auto& s : d) {
        frames.push_back(s.frame);
    }
    write_trace(dir / "frames.jsonl", frames);
    std::ofstream out(dir / "labels.csv");
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write labels.csv in " + dir.string());
    }
    out << "index,horizontal,vertical\n";
    out.precision(17);
    for (std::size_t i = 0; i < d.size(); ++i) {
        out << i << ',' << d[i].horizontal << ',' << d[i].vertical << '\n';
    }
}

}  // namespace agile_head
