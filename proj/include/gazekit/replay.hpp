#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazekit/dataset.hpp"
#include "gazekit/filtering.hpp"
#include "gazekit/fusion.hpp"
#include "gazekit/geometry.hpp"

namespace gaze {

enum class FilterKind { None, Kalman, Avg3 };

/// Stub predictor: the stored ground-truth angles plus a fixed offset and
/// seeded Gaussian noise. Lets the geometric pipeline run end to end
/// without trained weights.
struct StubSpec {
    double offset_pitch_rad = 0.0;
    double offset_yaw_rad = 0.0;
    double noise_rad = 0.0;
    std::uint64_t seed = 0;
};

/// Desk-scale replay model: per-token feature projections plus the fusion
/// transformer. Eye features are pooled grayscale patches, head-pose
/// features the warped landmarks and normalized head rotation, depth
/// features the un-equalized eye-region depth patches.
struct ReplayModel {
    HyperParams hp;
    FusionParams fusion;
    Eigen::MatrixXd w_right_eye, w_left_eye, w_headpose, w_depth;
    Eigen::VectorXd b_right_eye, b_left_eye, b_headpose, b_depth;
    int eye_pool = 8;  // pooling block size over the 112 px eye crops
    int depth_r = 5;   // depth patch side

    int eye_feature_dim() const;
    static constexpr int kHeadposeFeatureDim = 13; // 5 landmarks * 2 + 3 rotation angles
    int depth_feature_dim() const { return 2 * depth_r * depth_r; }

    static ReplayModel init(const HyperParams& hp, std::uint64_t seed);
};

void save_replay_model(const std::filesystem::path& path, const ReplayModel& model);
ReplayModel load_replay_model(const std::filesystem::path& path);

struct ReplayOptions {
    FilterKind filter_landmarks = FilterKind::None;
    FilterKind filter_angles = FilterKind::None;
    FilterKind filter_point = FilterKind::None;
    KalmanConfig kalman;
    std::optional<SubjectBias> bias;
};

struct ReplayRow {
    std::size_t index = 0;
    GazeAngles truth;
    ScreenPoint truth_point;
    GazeAngles raw;        // model / stub output
    GazeAngles calibrated; // after the subject bias
    GazeAngles filtered;   // after the angle filter
    ScreenPoint predicted_point;
    double error_deg = 0.0;
    double error_mm = 0.0;
    std::string error; // per-sample failure, empty when fine
};

/// Runs the offline pipeline over every sample in file order: prediction,
/// bias, filters, un-normalization, gaze point, metrics. Exactly one of
/// model/stub must be set; per-sample failures are recorded in the row and
/// never abort the batch. Filters reset at recording boundaries.
std::vector<ReplayRow> replay_subject(const SubjectFile& subject, const ReplayModel* model,
                                      const StubSpec* stub, const ReplayOptions& options);

void write_replay_csv(const std::filesystem::path& path, std::span<const ReplayRow> rows);
std::vector<ReplayRow> read_replay_csv(const std::filesystem::path& path);

} // namespace gaze
