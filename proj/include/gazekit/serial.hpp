#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "gazekit/geometry.hpp"

namespace gaze {

// Extrinsics <-> {"extrinsics": [[r r r t], ..., [0 0 0 1]]} (row-major 4x4)
nlohmann::json extrinsics_to_json(const Extrinsics& e);
Extrinsics extrinsics_from_json(const nlohmann::json& j);

// MonitorSpec <-> named fields
nlohmann::json monitor_to_json(const MonitorSpec& m);
MonitorSpec monitor_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::filesystem::path& path);   // throws IoError
void save_json_file(const std::filesystem::path& path, const nlohmann::json& j);

} // namespace gaze
