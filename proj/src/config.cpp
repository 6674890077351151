#include "gazekit/config.hpp"

#include <nlohmann/json.hpp>

#include "gazekit/params_io.hpp"
#include "gazekit/serial.hpp"

namespace gaze {

namespace {

std::filesystem::path resolve(const nlohmann::json& j, const char* key,
                              const std::filesystem::path& base) {
    if (!j.contains(key)) return {};
    std::filesystem::path p = j.at(key).get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p)) {
        throw ConfigError(std::string("config: referenced file does not exist: ") + p.string());
    }
    return p;
}

} // namespace

FilterKind filter_kind_from_string(const std::string& s) {
    if (s == "none") return FilterKind::None;
    if (s == "kalman") return FilterKind::Kalman;
    if (s == "avg3") return FilterKind::Avg3;
    throw ConfigError("unknown filter kind '" + s + "' (expected none|kalman|avg3)");
}

Config Config::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    Config c;
    c.face_model_path = resolve(j, "face_model", base_dir);
    c.monitor_path = resolve(j, "monitor", base_dir);
    c.extrinsics_path = resolve(j, "extrinsics", base_dir);
    c.parameters_path = resolve(j, "parameters", base_dir);

    if (j.contains("normalization")) {
        const auto& n = j["normalization"];
        c.norm.virtual_focal = n.value("virtual_focal", c.norm.virtual_focal);
        c.norm.norm_distance = n.value("norm_distance", c.norm.norm_distance);
        c.norm.face_patch = n.value("face_patch", c.norm.face_patch);
        c.norm.eye_patch = n.value("eye_patch", c.norm.eye_patch);
        c.norm.flip_left_eye = n.value("flip_left_eye", c.norm.flip_left_eye);
    }
    if (j.contains("depth")) {
        const auto& d = j["depth"];
        c.depth.erosion_radius = d.value("erosion_radius", c.depth.erosion_radius);
        c.depth.missing_value = d.value("missing_value", c.depth.missing_value);
        c.depth.missing_range = d.value("missing_range", c.depth.missing_range);
        c.depth.lambda_l1 = d.value("lambda_l1", c.depth.lambda_l1);
        if (d.contains("eye_filter")) {
            c.depth.eye_filter.region = d["eye_filter"].value("region", c.depth.eye_filter.region);
            c.depth.eye_filter.threshold_mm =
                d["eye_filter"].value("threshold_mm", c.depth.eye_filter.threshold_mm);
        }
        if (d.contains("augment")) {
            const auto& a = d["augment"];
            c.depth.augment.max_big_patches = a.value("max_big", c.depth.augment.max_big_patches);
            c.depth.augment.max_small_patches =
                a.value("max_small", c.depth.augment.max_small_patches);
            c.depth.augment.big_min = a.value("big_min", c.depth.augment.big_min);
            c.depth.augment.big_max = a.value("big_max", c.depth.augment.big_max);
            c.depth.augment.small_min = a.value("small_min", c.depth.augment.small_min);
            c.depth.augment.small_max = a.value("small_max", c.depth.augment.small_max);
        }
    }
    if (j.contains("model")) c.hyper = hyperparams_from_json(j["model"]);
    if (j.contains("filters")) {
        const auto& f = j["filters"];
        c.filters.landmarks = filter_kind_from_string(f.value("landmarks", "none"));
        c.filters.angles = filter_kind_from_string(f.value("angles", "none"));
        c.filters.point = filter_kind_from_string(f.value("point", "none"));
        if (f.contains("kalman")) {
            const auto& k = f["kalman"];
            c.filters.kalman.process_noise = k.value("q", c.filters.kalman.process_noise);
            c.filters.kalman.measurement_noise = k.value("r", c.filters.kalman.measurement_noise);
            c.filters.kalman.dt = k.value("dt", c.filters.kalman.dt);
        }
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_json_file(path);
    return from_json(j, path.parent_path());
}

GenericFaceModel load_face_model(const std::filesystem::path& path) {
    const nlohmann::json j = load_json_file(path);
    const auto& pts = j.at("points");
    if (!pts.is_array() || pts.size() != 5) {
        throw SchemaError("face model JSON: expected 5 points");
    }
    GenericFaceModel model;
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& p = pts.at(i);
        if (!p.is_array() || p.size() != 3) {
            throw SchemaError("face model JSON: each point needs 3 coordinates");
        }
        model.pts[i] = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    }
    model.validate();
    return model;
}

void save_face_model(const std::filesystem::path& path, const GenericFaceModel& model) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : model.pts) pts.push_back({p.x(), p.y(), p.z()});
    save_json_file(path, nlohmann::json{{"points", pts}});
}

} // namespace gaze
