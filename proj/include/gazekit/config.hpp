#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json_fwd.hpp>

#include "gazekit/depthproc.hpp"
#include "gazekit/filtering.hpp"
#include "gazekit/fusion.hpp"
#include "gazekit/normalization.hpp"
#include "gazekit/replay.hpp"

namespace gaze {

struct DepthConfig {
    int erosion_radius = 12;       // r_d
    double missing_value = -1.0;   // missing indicator after equalization
    double missing_range = 0.01;   // r_O
    double lambda_l1 = 10.0;
    EyeFilterParams eye_filter;
    AugmentSpec augment;
};

struct FilterSelection {
    FilterKind landmarks = FilterKind::None;
    FilterKind angles = FilterKind::None;
    FilterKind point = FilterKind::None;
    KalmanConfig kalman;
};

/// The batch CLI configuration. Path fields are optional; set paths must
/// exist at load time.
struct Config {
    std::filesystem::path face_model_path;
    std::filesystem::path monitor_path;
    std::filesystem::path extrinsics_path;
    std::filesystem::path parameters_path;
    NormParams norm;
    DepthConfig depth;
    HyperParams hyper;
    FilterSelection filters;

    static Config from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static Config load(const std::filesystem::path& path); // throws ConfigError/IoError
};

FilterKind filter_kind_from_string(const std::string& s); // none|kalman|avg3

/// Face model JSON: {"points": [[x,y,z] x 5]} in the Landmarks5 order.
GenericFaceModel load_face_model(const std::filesystem::path& path);
void save_face_model(const std::filesystem::path& path, const GenericFaceModel& model);

} // namespace gaze
