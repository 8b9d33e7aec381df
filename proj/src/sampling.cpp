#include "nighttrack/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace nighttrack {

Image crop_resize(const Image& src, const CropSpec& spec, int out_size) {
    Image out(out_size, out_size);
    const std::array<double, 3> pad = src.channel_means();
    const double scale = spec.side / static_cast<double>(out_size);
    const double x0 = spec.x0(), y0 = spec.y0();
    for (int oy = 0; oy < out_size; ++oy) {
        // Sample at source pixel centers; out pixel (ox,oy) center maps to
        // x0 + (ox+0.5)*scale in frame coordinates.
        const double sy = y0 + (oy + 0.5) * scale - 0.5;
        for (int ox = 0; ox < out_size; ++ox) {
            const double sx = x0 + (ox + 0.5) * scale - 0.5;
            const int ix = static_cast<int>(std::floor(sx));
            const int iy = static_cast<int>(std::floor(sy));
            const double fx = sx - ix, fy = sy - iy;
            for (int c = 0; c < 3; ++c) {
                auto tap = [&](int x, int y) -> double {
                    if (x < 0 || y < 0 || x >= src.width || y >= src.height) return pad[static_cast<size_t>(c)];
                    return src.at(x, y, c);
                };
                const double v = (1.0 - fx) * (1.0 - fy) * tap(ix, iy) +
                                 fx * (1.0 - fy) * tap(ix + 1, iy) +
                                 (1.0 - fx) * fy * tap(ix, iy + 1) +
                                 fx * fy * tap(ix + 1, iy + 1);
                out.at(ox, oy, c) = v;
            }
        }
    }
    return out;
}

CropSpec search_spec_around(const Box& prior, double context) {
    const double side = context * std::max(prior.width(), prior.height());
    return CropSpec{prior.cx(), prior.cy(), side};
}

PairSample sample_pair(const Sequence& seq, size_t template_frame, size_t search_frame,
                       const SamplingConfig& cfg, Rng* jitter_rng) {
    if (template_frame >= seq.frames.size() || search_frame >= seq.frames.size()) {
        throw DataError("sample_pair: frame index out of range in " + seq.name);
    }
    const Box& tb = seq.groundtruth[template_frame];
    const Box& sb = seq.groundtruth[search_frame];
    if (tb.width() <= 0.0 || tb.height() <= 0.0 || sb.width() <= 0.0 || sb.height() <= 0.0) {
        throw DataError("sample_pair: degenerate groundtruth box in " + seq.name);
    }

    PairSample out;
    out.template_spec = CropSpec{tb.cx(), tb.cy(), cfg.template_context * std::max(tb.width(), tb.height())};
    out.template_crop = crop_resize(seq.frames[template_frame], out.template_spec, cfg.template_size);

    double side = cfg.search_context * std::max(sb.width(), sb.height());
    double cx = sb.cx(), cy = sb.cy();
    if (jitter_rng) {
        side *= jitter_rng->uniform(cfg.scale_jitter_lo, cfg.scale_jitter_hi);
        cx += jitter_rng->uniform(-cfg.center_jitter, cfg.center_jitter) * side;
        cy += jitter_rng->uniform(-cfg.center_jitter, cfg.center_jitter) * side;
    }
    out.search_spec = CropSpec{cx, cy, side};
    out.search_crop = crop_resize(seq.frames[search_frame], out.search_spec, cfg.search_size);
    out.gt_in_search = pixel_to_norm(sb, out.search_spec.x0(), out.search_spec.y0(), side);
    return out;
}

}  // namespace nighttrack
