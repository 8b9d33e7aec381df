#include "nighttrack/synth.hpp"

#include <algorithm>
#include <cmath>

#include "nighttrack/rng.hpp"

namespace nighttrack {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Smooth periodic texture: a few random plane waves per channel, mapped into
// [lo, hi].
struct WaveTexture {
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::array<std::vector<Wave>, 3> waves;
    double lo = 0.0, hi = 1.0;

    static WaveTexture make(uint64_t seed, double lo, double hi) {
        WaveTexture t;
        t.lo = lo;
        t.hi = hi;
        Rng rng(seed);
        for (int c = 0; c < 3; ++c) {
            for (int k = 0; k < 3; ++k) {
                WaveTexture::Wave w;
                w.fx = rng.uniform(0.02, 0.12);
                w.fy = rng.uniform(0.02, 0.12);
                w.phase = rng.uniform(0.0, kTwoPi);
                w.amp = rng.uniform(0.3, 1.0);
                t.waves[static_cast<size_t>(c)].push_back(w);
            }
        }
        return t;
    }

    double sample(double x, double y, int c) const {
        double s = 0.0, total = 0.0;
        for (const auto& w : waves[static_cast<size_t>(c)]) {
            s += w.amp * std::sin(kTwoPi * (w.fx * x + w.fy * y) + w.phase);
            total += w.amp;
        }
        const double unit = 0.5 + 0.5 * s / total;  // [0,1]
        return lo + (hi - lo) * unit;
    }
};

double round_px(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

DarkenParams DarkenParams::sample(uint64_t seed) {
    Rng rng(seed);
    DarkenParams p;
    p.gamma = rng.uniform(2.0, 4.0);
    p.brightness = rng.uniform(0.1, 0.4);
    p.noise_sigma = rng.uniform(0.01, 0.05);
    p.desaturation = rng.uniform(0.0, 0.5);
    p.rng_seed = seed;
    return p;
}

Sequence synth_scene(const SceneConfig& cfg) {
    if (cfg.frame_count < 2) throw ConfigError("synth_scene: frame_count must be >= 2");
    const double fw = cfg.frame_width, fh = cfg.frame_height;
    // Scale drift is clamped to |log s| <= 0.35, so the object can grow by
    // up to exp(0.35); it must still fit with the 1 px margin on both sides.
    const double max_scale = cfg.scale_drift_sigma > 0.0 ? std::exp(0.35) : 1.0;
    if (cfg.object_width <= 0.0 || cfg.object_height <= 0.0 ||
        cfg.object_width * max_scale >= fw - 2.0 || cfg.object_height * max_scale >= fh - 2.0) {
        throw ConfigError("synth_scene: object does not fit inside the frame");
    }

    WaveTexture bg = WaveTexture::make(cfg.background_texture_seed, 0.10, 0.45);
    WaveTexture fg = WaveTexture::make(cfg.object_texture_seed, 0.55, 0.95);

    Rng rng(cfg.rng_seed);
    double cx = fw * rng.uniform(0.3, 0.7);
    double cy = fh * rng.uniform(0.3, 0.7);
    double vx = rng.normal(0.0, cfg.motion_sigma);
    double vy = rng.normal(0.0, cfg.motion_sigma);
    double log_scale = 0.0;

    Sequence seq;
    seq.frames.reserve(static_cast<size_t>(cfg.frame_count));
    seq.groundtruth.reserve(static_cast<size_t>(cfg.frame_count));

    for (int t = 0; t < cfg.frame_count; ++t) {
        if (t > 0) {
            vx += rng.normal(0.0, cfg.motion_sigma);
            vy += rng.normal(0.0, cfg.motion_sigma);
            const double vmax = 0.08 * std::min(fw, fh);
            vx = std::clamp(vx, -vmax, vmax);
            vy = std::clamp(vy, -vmax, vmax);
            cx += vx;
            cy += vy;
            log_scale += rng.normal(0.0, cfg.scale_drift_sigma);
            log_scale = std::clamp(log_scale, -0.35, 0.35);
        }
        const double s = std::exp(log_scale);
        const double w = cfg.object_width * s;
        const double h = cfg.object_height * s;

        // Reflect at the borders so the box stays >= 1 px inside.
        const double min_cx = 1.0 + w / 2.0, max_cx = fw - 1.0 - w / 2.0;
        const double min_cy = 1.0 + h / 2.0, max_cy = fh - 1.0 - h / 2.0;
        if (cx < min_cx) { cx = 2.0 * min_cx - cx; vx = -vx; }
        if (cx > max_cx) { cx = 2.0 * max_cx - cx; vx = -vx; }
        if (cy < min_cy) { cy = 2.0 * min_cy - cy; vy = -vy; }
        if (cy > max_cy) { cy = 2.0 * max_cy - cy; vy = -vy; }
        cx = std::clamp(cx, min_cx, max_cx);
        cy = std::clamp(cy, min_cy, max_cy);

        const double bx = round_px(cx - w / 2.0);
        const double by = round_px(cy - h / 2.0);
        const double bw = round_px(w);
        const double bh = round_px(h);

        Image frame(cfg.frame_width, cfg.frame_height);
        for (int y = 0; y < cfg.frame_height; ++y) {
            for (int x = 0; x < cfg.frame_width; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                bool inside;
                if (cfg.shape == ObjectShape::rectangle) {
                    inside = px >= bx && px <= bx + bw && py >= by && py <= by + bh;
                } else {
                    const double nx = (px - (bx + bw / 2.0)) / (bw / 2.0);
                    const double ny = (py - (by + bh / 2.0)) / (bh / 2.0);
                    inside = nx * nx + ny * ny <= 1.0;
                }
                for (int c = 0; c < 3; ++c) {
                    frame.at(x, y, c) = inside ? fg.sample(px - bx, py - by, c) : bg.sample(px, py, c);
                }
            }
        }
        quantize8(frame);
        seq.frames.push_back(std::move(frame));
        seq.groundtruth.push_back(Box::from_xywh(bx, by, bw, bh, BoxFrame::pixel));
    }

    seq.attributes.push_back(cfg.shape == ObjectShape::rectangle ? "rectangle" : "ellipse");
    if (cfg.scale_drift_sigma > 0.0) seq.attributes.push_back("scale-variation");
    if (cfg.motion_sigma > 2.0) seq.attributes.push_back("fast-motion");
    return seq;
}

Image darken(const Image& img, const DarkenParams& params) {
    if (params.gamma < 1.0) throw ConfigError("darken: gamma must be >= 1 (darkening only)");
    Rng rng(params.rng_seed);
    Image out(img.width, img.height);
    const size_t n = static_cast<size_t>(img.width) * static_cast<size_t>(img.height);
    for (size_t i = 0; i < n; ++i) {
        double ch[3];
        for (int c = 0; c < 3; ++c) {
            ch[c] = params.brightness * std::pow(img.rgb[i * 3 + static_cast<size_t>(c)], params.gamma);
        }
        if (params.desaturation > 0.0) {
            const double luma = 0.299 * ch[0] + 0.587 * ch[1] + 0.114 * ch[2];
            for (double& v : ch) v += params.desaturation * (luma - v);
        }
        for (int c = 0; c < 3; ++c) {
            double v = ch[c];
            if (params.noise_sigma > 0.0) v += rng.normal(0.0, params.noise_sigma);
            out.rgb[i * 3 + static_cast<size_t>(c)] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

std::vector<Sequence> generate_sequences(const DatasetGenConfig& cfg) {
    if (cfg.sequences < 1) throw ConfigError("generate_sequences: need at least one sequence");
    std::vector<Sequence> out;
    Rng root(cfg.seed);
    for (int i = 0; i < cfg.sequences; ++i) {
        Rng r = root.fork(static_cast<uint64_t>(i));
        SceneConfig sc;
        sc.frame_width = cfg.width;
        sc.frame_height = cfg.height;
        sc.frame_count = cfg.frames;
        sc.shape = (i % 2 == 0) ? ObjectShape::rectangle : ObjectShape::ellipse;
        const double span = std::min(cfg.width, cfg.height);
        sc.object_width = r.uniform(0.15, 0.27) * span;
        sc.object_height = r.uniform(0.12, 0.23) * span;
        sc.motion_sigma = r.uniform(0.8, 2.0);
        sc.scale_drift_sigma = (i % 3 == 0) ? 0.02 : 0.0;
        sc.object_texture_seed = r.next_u64();
        sc.background_texture_seed = r.next_u64();
        sc.rng_seed = r.next_u64();
        Sequence seq = synth_scene(sc);
        seq.name = (cfg.night ? "night_" : "day_") + std::to_string(i);
        if (cfg.night) {
            const DarkenParams dp = DarkenParams::sample(root.fork(0x6e69ull + static_cast<uint64_t>(i)).next_u64());
            seq = darken_sequence(seq, dp);
            seq.name = "night_" + std::to_string(i);
        }
        out.push_back(std::move(seq));
    }
    return out;
}

Sequence darken_sequence(const Sequence& seq, const DarkenParams& params) {
    Sequence night;
    night.name = seq.name;
    night.groundtruth = seq.groundtruth;
    night.attributes = seq.attributes;
    night.attributes.push_back("low-ambient-intensity");
    night.frames.reserve(seq.frames.size());
    Rng base(params.rng_seed);
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        DarkenParams per_frame = params;
        per_frame.rng_seed = base.fork(i).next_u64();
        Image d = darken(seq.frames[i], per_frame);
        quantize8(d);
        night.frames.push_back(std::move(d));
    }
    return night;
}

}  // namespace nighttrack
