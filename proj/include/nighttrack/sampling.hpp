#pragma once

#include "nighttrack/box.hpp"
#include "nighttrack/image.hpp"
#include "nighttrack/rng.hpp"
#include "nighttrack/synth.hpp"

namespace nighttrack {

// Source square for a crop, in pixel coordinates of the original frame.
struct CropSpec {
    double cx = 0.0;
    double cy = 0.0;
    double side = 0.0;
    double x0() const { return cx - side / 2.0; }
    double y0() const { return cy - side / 2.0; }
};

// Bilinear resample of a square source region to out_size x out_size.
// Samples falling outside the frame read the per-channel frame mean.
Image crop_resize(const Image& src, const CropSpec& spec, int out_size);

struct PairSample {
    Image template_crop;
    Image search_crop;
    Box gt_in_search;  // normalized search frame
    CropSpec template_spec;
    CropSpec search_spec;
};

struct SamplingConfig {
    int template_size = 64;
    int search_size = 128;
    double template_context = 2.0;  // crop side = context * max(w,h)
    double search_context = 4.0;
    double center_jitter = 0.125;   // uniform +-fraction of the crop side
    double scale_jitter_lo = 0.8;
    double scale_jitter_hi = 1.2;
};

// Siamese-style training pair: template crop around the template-frame box,
// jittered search crop around the search-frame box, groundtruth re-expressed
// in normalized search coordinates. Degenerate groundtruth is a DataError.
// Pass jitter=false (or a null rng) for deterministic centered crops.
PairSample sample_pair(const Sequence& seq, size_t template_frame, size_t search_frame,
                       const SamplingConfig& cfg, Rng* jitter_rng);

// Search crop spec used at tracking time, centered on a prior box.
CropSpec search_spec_around(const Box& prior, double context);

}  // namespace nighttrack
