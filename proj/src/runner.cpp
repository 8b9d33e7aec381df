#include "nighttrack/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "nighttrack/dataset.hpp"

namespace nighttrack {

TrackRun run_tracker_with(const BoxPredictor& predictor, const Sequence& seq,
                          const SamplingConfig& cfg) {
    if (seq.frames.empty() || seq.groundtruth.empty()) {
        throw EvalError("run_tracker: empty sequence " + seq.name);
    }
    const Box& init = seq.groundtruth[0];
    if (init.width() <= 0.0 || init.height() <= 0.0) {
        throw EvalError("run_tracker: degenerate initialization box in " + seq.name);
    }

    TrackRun run;
    run.sequence = seq.name;
    run.attributes = seq.attributes;
    run.groundtruth = seq.groundtruth;
    run.predictions.push_back(init);  // OPE initialization frame

    const CropSpec tspec{init.cx(), init.cy(),
                         cfg.template_context * std::max(init.width(), init.height())};
    const Image template_crop = crop_resize(seq.frames[0], tspec, cfg.template_size);

    Box state = init;
    for (size_t t = 1; t < seq.frames.size(); ++t) {
        const CropSpec sspec = search_spec_around(state, cfg.search_context);
        const Image search_crop = crop_resize(seq.frames[t], sspec, cfg.search_size);
        Box raw = predictor(template_crop, search_crop);
        raw.frame = BoxFrame::search_norm;
        Box pixel = norm_to_pixel(raw, sspec.x0(), sspec.y0(), sspec.side);
        if (pixel.width() <= 0.0 || pixel.height() <= 0.0) {
            run.degenerate_predictions += 1;
            run.predictions.push_back(state);  // continue from the previous box
        } else {
            state = pixel;
            run.predictions.push_back(pixel);
        }
    }
    fill_series(run);
    return run;
}

TrackRun run_tracker(const TrackerModel& model, const Sequence& seq) {
    const SamplingConfig cfg{model.config().backbone.template_size,
                             model.config().backbone.search_size};
    BoxPredictor predictor = [&model](const Image& tmpl, const Image& search) {
        Tensor out = model.forward_box(tmpl, search);
        return Box::from_corners(out.data()[0], out.data()[1], out.data()[2], out.data()[3],
                                 BoxFrame::search_norm);
    };
    return run_tracker_with(predictor, seq, cfg);
}

void write_boxes(const TrackRun& run, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("write_boxes: cannot open " + path);
    char buf[160];
    for (const Box& b : run.predictions) {
        std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.4f\n", b.x1, b.y1, b.width(), b.height());
        f << buf;
    }
}

std::vector<Box> read_boxes(const std::string& path) {
    // Same "x,y,w,h" line format as groundtruth, but a prediction may have
    // shrunk to (near) zero size; only negative sizes are malformed.
    std::ifstream f(path);
    if (!f) throw DataError("read_boxes: cannot open " + path);
    std::vector<Box> boxes;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        double x, y, w, h;
        char extra;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf %c", &x, &y, &w, &h, &extra) != 4) {
            throw ParseError("malformed box line " + std::to_string(lineno) + " in " + path + ": '" +
                             line + "'");
        }
        if (w < 0.0 || h < 0.0) {
            throw ParseError("negative box size at line " + std::to_string(lineno) + " in " + path);
        }
        boxes.push_back(Box::from_xywh(x, y, w, h, BoxFrame::pixel));
    }
    return boxes;
}

}  // namespace nighttrack
