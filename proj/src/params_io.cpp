#include "gazekit/params_io.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace gaze {

namespace {

constexpr char kMagic[4] = {'G', 'K', 'P', 'M'};

std::string variant_name(EncoderVariant v) {
    switch (v) {
    case EncoderVariant::PreLN: return "pre_ln";
    case EncoderVariant::PostLN: return "post_ln";
    case EncoderVariant::B2T: return "b2t";
    }
    return "b2t";
}

EncoderVariant variant_from_name(const std::string& s) {
    if (s == "pre_ln") return EncoderVariant::PreLN;
    if (s == "post_ln") return EncoderVariant::PostLN;
    if (s == "b2t") return EncoderVariant::B2T;
    throw ConfigError("unknown encoder variant '" + s + "'");
}

} // namespace

const Eigen::MatrixXd& TensorFile::require(const std::string& name) const {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw SchemaError("parameter file: missing tensor '" + name + "'");
    return it->second;
}

void save_tensors(const std::filesystem::path& path, std::span<const TensorRef> tensors,
                  const nlohmann::json& meta) {
    nlohmann::json manifest;
    manifest["format"] = 1;
    manifest["dtype"] = "float32";
    manifest["order"] = "column_major";
    manifest["meta"] = meta;
    nlohmann::json list = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& t : tensors) {
        list.push_back({{"name", t.name},
                        {"shape", {t.rows, t.cols}},
                        {"offset", offset}});
        offset += static_cast<std::size_t>(t.size());
    }
    manifest["tensors"] = std::move(list);
    const std::string manifest_str = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, 4);
    const auto len = static_cast<std::uint32_t>(manifest_str.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(manifest_str.data(), static_cast<std::streamsize>(manifest_str.size()));
    for (const auto& t : tensors) {
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const float v = static_cast<float>(t.data[i]);
            out.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

TensorFile load_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[4];
    std::uint32_t len = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&len), 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw SchemaError(path.string() + ": not a parameter file");
    }
    std::string manifest_str(len, '\0');
    in.read(manifest_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw SchemaError(path.string() + ": truncated manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_str);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": invalid manifest: " + e.what());
    }

    std::vector<float> payload;
    {
        float v;
        while (in.read(reinterpret_cast<char*>(&v), 4)) payload.push_back(v);
    }

    TensorFile file;
    file.meta_json = manifest.contains("meta") ? manifest["meta"].dump() : "{}";
    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
        const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
        const auto offset = entry.at("offset").get<std::size_t>();
        const auto count = static_cast<std::size_t>(rows * cols);
        if (offset + count > payload.size()) {
            throw SchemaError(path.string() + ": tensor '" + name + "' exceeds the payload");
        }
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = static_cast<double>(payload[offset + static_cast<std::size_t>(i)]);
        }
        file.tensors.emplace(name, std::move(m));
    }
    return file;
}

void save_fusion_params(const std::filesystem::path& path, const FusionParams& params,
                        const HyperParams& hp) {
    auto refs = tensor_refs(const_cast<FusionParams&>(params));
    save_tensors(path, refs, nlohmann::json{{"hyperparams", hyperparams_to_json(hp)}});
}

std::pair<FusionParams, HyperParams> load_fusion_params(const std::filesystem::path& path) {
    const TensorFile file = load_tensors(path);
    const nlohmann::json meta = nlohmann::json::parse(file.meta_json);
    const HyperParams hp = hyperparams_from_json(meta.at("hyperparams"));

    FusionParams params = FusionParams::zeros(hp);
    for (auto& ref : tensor_refs(params)) {
        const Eigen::MatrixXd& src = file.require(ref.name);
        if (src.rows() != ref.rows || src.cols() != ref.cols) {
            throw SchemaError("parameter file: tensor '" + ref.name + "' has the wrong shape");
        }
        std::memcpy(ref.data, src.data(), sizeof(double) * static_cast<std::size_t>(ref.size()));
    }
    return {std::move(params), hp};
}

nlohmann::json hyperparams_to_json(const HyperParams& hp) {
    return nlohmann::json{
        {"d_model", hp.d_model},
        {"d_ff", hp.d_ff},
        {"n_heads", hp.n_heads},
        {"n_layers", hp.n_layers},
        {"n_tokens", hp.n_tokens},
        {"dropout_attn", hp.dropout_attn},
        {"dropout_ff", hp.dropout_ff},
        {"variant", variant_name(hp.variant)},
        {"positional", hp.positional == PositionalEncoding::Learned ? "learned" : "sinusoidal"},
    };
}

HyperParams hyperparams_from_json(const nlohmann::json& j) {
    HyperParams hp;
    hp.d_model = j.value("d_model", hp.d_model);
    hp.d_ff = j.value("d_ff", hp.d_ff);
    hp.n_heads = j.value("n_heads", hp.n_heads);
    hp.n_layers = j.value("n_layers", hp.n_layers);
    hp.n_tokens = j.value("n_tokens", hp.n_tokens);
    hp.dropout_attn = j.value("dropout_attn", hp.dropout_attn);
    hp.dropout_ff = j.value("dropout_ff", hp.dropout_ff);
    if (j.contains("variant")) hp.variant = variant_from_name(j["variant"].get<std::string>());
    if (j.contains("positional")) {
        const auto s = j["positional"].get<std::string>();
        if (s == "learned") {
            hp.positional = PositionalEncoding::Learned;
        } else if (s == "sinusoidal") {
            hp.positional = PositionalEncoding::Sinusoidal;
        } else {
            throw ConfigError("unknown positional encoding '" + s + "'");
        }
    }
    hp.validate();
    return hp;
}

} // namespace gaze
