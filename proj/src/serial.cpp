#include "gazekit/serial.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace gaze {

nlohmann::json extrinsics_to_json(const Extrinsics& e) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < 4; ++c) row.push_back(e.matrix()(r, c));
        rows.push_back(std::move(row));
    }
    return nlohmann::json{{"extrinsics", rows}};
}

Extrinsics extrinsics_from_json(const nlohmann::json& j) {
    const auto& rows = j.contains("extrinsics") ? j.at("extrinsics") : j;
    if (!rows.is_array() || rows.size() != 4) {
        throw SchemaError("extrinsics JSON: expected a 4x4 row-major array");
    }
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r) {
        const auto& row = rows.at(static_cast<std::size_t>(r));
        if (!row.is_array() || row.size() != 4) {
            throw SchemaError("extrinsics JSON: expected a 4x4 row-major array");
        }
        for (int c = 0; c < 4; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return Extrinsics(m);
}

nlohmann::json monitor_to_json(const MonitorSpec& m) {
    return nlohmann::json{{"width_px", m.width_px},   {"height_px", m.height_px},
                          {"offset_x", m.offset_x},   {"offset_y", m.offset_y},
                          {"width_mm", m.width_mm},   {"height_mm", m.height_mm}};
}

MonitorSpec monitor_from_json(const nlohmann::json& j) {
    MonitorSpec m;
    try {
        m.width_px = j.at("width_px").get<double>();
        m.height_px = j.at("height_px").get<double>();
        m.offset_x = j.value("offset_x", 0.0);
        m.offset_y = j.value("offset_y", 0.0);
        m.width_mm = j.at("width_mm").get<double>();
        m.height_mm = j.at("height_mm").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("monitor JSON: ") + e.what());
    }
    m.validate();
    return m;
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

void save_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace gaze
