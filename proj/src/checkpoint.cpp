#include "nighttrack/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace nighttrack {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'K', 'P'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

uint32_t get_u32(const std::string& buf, size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[off + static_cast<size_t>(i)])) << (8 * i);
    return v;
}

uint64_t get_u64(const std::string& buf, size_t off) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[off + static_cast<size_t>(i)])) << (8 * i);
    return v;
}

float get_f32(const std::string& buf, size_t off) {
    const uint32_t bits = get_u32(buf, off);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

nlohmann::ordered_json config_to_json(const ModelConfig& cfg) {
    nlohmann::ordered_json j;
    j["template_size"] = cfg.backbone.template_size;
    j["search_size"] = cfg.backbone.search_size;
    j["patch_size"] = cfg.backbone.patch_size;
    j["embed_dim"] = cfg.backbone.embed_dim;
    j["num_layers"] = cfg.backbone.num_layers;
    j["num_heads"] = cfg.backbone.num_heads;
    j["mlp_ratio"] = cfg.backbone.mlp_ratio;
    j["dcp_reduction"] = cfg.dcp_reduction;
    j["profile"] = cfg.profile.to_string();
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.backbone.template_size = j.at("template_size").get<int>();
    cfg.backbone.search_size = j.at("search_size").get<int>();
    cfg.backbone.patch_size = j.at("patch_size").get<int>();
    cfg.backbone.embed_dim = j.at("embed_dim").get<int>();
    cfg.backbone.num_layers = j.at("num_layers").get<int>();
    cfg.backbone.num_heads = j.at("num_heads").get<int>();
    cfg.backbone.mlp_ratio = j.at("mlp_ratio").get<int>();
    cfg.dcp_reduction = j.at("dcp_reduction").get<int>();
    cfg.profile = AblationProfile::from_string(j.at("profile").get<std::string>());
    return cfg;
}

void save_checkpoint(const ModelConfig& cfg, const ModelParams& params,
                     const nlohmann::ordered_json& metadata, const std::string& path) {
    nlohmann::ordered_json manifest;
    manifest["format_version"] = kVersion;
    manifest["config"] = config_to_json(cfg);
    manifest["metadata"] = metadata;
    manifest["params"] = nlohmann::ordered_json::array();
    uint64_t offset = 0;
    for (const auto& p : params.all()) {
        nlohmann::ordered_json e;
        e["name"] = p.name;
        e["shape"] = p.value.shape();
        e["tag"] = tag_name(p.tag);
        e["frozen"] = p.frozen;
        e["offset"] = offset;
        e["numel"] = p.value.numel();
        manifest["params"].push_back(e);
        offset += static_cast<uint64_t>(p.value.numel());
    }
    const std::string mjson = manifest.dump();

    std::string blob;
    blob.reserve(16 + mjson.size() + static_cast<size_t>(offset) * 4);
    blob.append(kMagic, 4);
    put_u32(blob, kVersion);
    put_u64(blob, mjson.size());
    blob.append(mjson);
    for (const auto& p : params.all()) {
        for (double v : p.value.data()) put_f32(blob, static_cast<float>(v));
    }

    // Write-then-rename so a failed write never leaves a torn checkpoint.
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw CheckpointError("save_checkpoint: cannot open " + tmp);
        f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!f) throw CheckpointError("save_checkpoint: short write to " + tmp);
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("load_checkpoint: cannot open " + path);
    std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, 4) != 0) {
        throw CheckpointError("load_checkpoint: " + path + " is not a checkpoint file");
    }
    if (get_u32(blob, 4) != kVersion) {
        throw CheckpointError("load_checkpoint: unsupported format version in " + path);
    }
    const uint64_t mlen = get_u64(blob, 8);
    if (16 + mlen > blob.size()) throw CheckpointError("load_checkpoint: truncated manifest in " + path);

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(blob.substr(16, mlen));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("load_checkpoint: bad manifest: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.config = config_from_json(manifest.at("config"));
    ckpt.metadata = manifest.value("metadata", nlohmann::ordered_json::object());

    uint64_t total = 0;
    for (const auto& e : manifest.at("params")) total += e.at("numel").get<uint64_t>();
    const size_t payload_off = 16 + static_cast<size_t>(mlen);
    if (blob.size() != payload_off + total * 4) {
        throw CheckpointError("load_checkpoint: payload size mismatch in " + path + " (expected " +
                              std::to_string(total * 4) + " bytes)");
    }

    size_t off = payload_off;
    for (const auto& e : manifest.at("params")) {
        Shape shape = e.at("shape").get<Shape>();
        const int64_t numel = e.at("numel").get<int64_t>();
        if (numel_of(shape) != numel) {
            throw CheckpointError("load_checkpoint: shape/numel mismatch for " +
                                  e.at("name").get<std::string>());
        }
        std::vector<double> values(static_cast<size_t>(numel));
        for (int64_t i = 0; i < numel; ++i) {
            values[static_cast<size_t>(i)] = static_cast<double>(get_f32(blob, off));
            off += 4;
        }
        const bool frozen = e.at("frozen").get<bool>();
        ckpt.params.add(e.at("name").get<std::string>(),
                        Tensor::from_data(std::move(shape), std::move(values)),
                        tag_from_name(e.at("tag").get<std::string>()), frozen);
    }
    return ckpt;
}

}  // namespace nighttrack
