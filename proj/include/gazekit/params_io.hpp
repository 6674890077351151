#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "gazekit/fusion.hpp"

namespace gaze {

/// Generic named-tensor container loaded from the binary parameter format:
/// magic + JSON shape manifest + little-endian float32 payload.
struct TensorFile {
    std::map<std::string, Eigen::MatrixXd> tensors;
    std::string meta_json; // manifest "meta" object, raw

    const Eigen::MatrixXd& require(const std::string& name) const; // throws SchemaError
};

void save_tensors(const std::filesystem::path& path, std::span<const TensorRef> tensors,
                  const nlohmann::json& meta);
TensorFile load_tensors(const std::filesystem::path& path);

/// FusionParams + hyperparameters in one file.
void save_fusion_params(const std::filesystem::path& path, const FusionParams& params,
                        const HyperParams& hp);
std::pair<FusionParams, HyperParams> load_fusion_params(const std::filesystem::path& path);

nlohmann::json hyperparams_to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const nlohmann::json& j);

} // namespace gaze
