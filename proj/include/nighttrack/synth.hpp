#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nighttrack/box.hpp"
#include "nighttrack/image.hpp"

namespace nighttrack {

enum class ObjectShape { rectangle, ellipse };

struct SceneConfig {
    int frame_width = 96;
    int frame_height = 96;
    int frame_count = 60;
    ObjectShape shape = ObjectShape::rectangle;
    double object_width = 20.0;
    double object_height = 16.0;
    uint64_t object_texture_seed = 1;
    double motion_sigma = 1.5;       // random-walk velocity step, px/frame
    double scale_drift_sigma = 0.0;  // log-scale random walk
    uint64_t background_texture_seed = 2;
    uint64_t rng_seed = 0;
};

struct DarkenParams {
    double gamma = 2.5;        // in [2,4]; >= 1 means darkening only
    double brightness = 0.25;  // in [0.1, 0.4]
    double noise_sigma = 0.02; // in [0.01, 0.05]
    double desaturation = 0.3; // in [0, 0.5], mix toward luma
    uint64_t rng_seed = 0;

    // Seed-derived parameters within the documented ranges.
    static DarkenParams sample(uint64_t seed);
};

// One generated sequence: frames plus exact per-frame groundtruth in xywh
// pixel form, attribute tags and a name.
struct Sequence {
    std::string name;
    std::vector<Image> frames;
    std::vector<Box> groundtruth;  // pixel frame, valid boxes
    std::vector<std::string> attributes;
};

// Deterministic scene simulation: textured background, textured moving
// object, random-walk motion reflected at the borders so the box stays at
// least one pixel inside the frame. Same config (including seed) yields
// bit-identical output.
Sequence synth_scene(const SceneConfig& cfg);

// out = clip(brightness * in^gamma + noise), with optional desaturation
// toward luma applied before the noise.
Image darken(const Image& img, const DarkenParams& params);

// Darkens every frame of a sequence and tags it.
Sequence darken_sequence(const Sequence& seq, const DarkenParams& params);

struct DatasetGenConfig {
    int sequences = 8;
    int frames = 60;
    int width = 96;
    int height = 96;
    uint64_t seed = 0;
    bool night = false;  // darken with per-sequence seed-derived parameters
};

// A varied set of sequences (object shape, size, texture and motion drawn
// per sequence). Each sequence gets its own stream forked from (seed, index)
// so generation is schedule-independent.
std::vector<Sequence> generate_sequences(const DatasetGenConfig& cfg);

}  // namespace nighttrack
