#pragma once

#include <string>

#include "json.hpp"
#include "nighttrack/model.hpp"

namespace nighttrack {

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    nlohmann::ordered_json metadata;  // config echo, training info, metrics
};

// Single-file format: magic + version, a JSON manifest (names, shapes, tags,
// frozen flags, config echo, metadata) and a little-endian IEEE-754 32-bit
// payload in manifest order. Loading verifies sizes exactly; a truncated or
// oversized payload is a CheckpointError and no partial model is returned.
void save_checkpoint(const ModelConfig& cfg, const ModelParams& params,
                     const nlohmann::ordered_json& metadata, const std::string& path);

Checkpoint load_checkpoint(const std::string& path);

nlohmann::ordered_json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace nighttrack
