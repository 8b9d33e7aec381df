#pragma once

#include <functional>
#include <string>

#include "nighttrack/metrics.hpp"
#include "nighttrack/model.hpp"
#include "nighttrack/sampling.hpp"
#include "nighttrack/synth.hpp"

namespace nighttrack {

// Predicts a raw normalized box for one (template crop, search crop) pair.
using BoxPredictor = std::function<Box(const Image& template_crop, const Image& search_crop)>;

// One-pass evaluation: template cropped once from frame-1 groundtruth, each
// later search region centered on the previous predicted box at 4x context.
// A prediction that is degenerate after regularization is recorded and the
// tracker continues from the previous box.
TrackRun run_tracker_with(const BoxPredictor& predictor, const Sequence& seq,
                          const SamplingConfig& cfg);

TrackRun run_tracker(const TrackerModel& model, const Sequence& seq);

// Predicted boxes file: one "x,y,w,h" line per frame (same format as
// groundtruth).
void write_boxes(const TrackRun& run, const std::string& path);
std::vector<Box> read_boxes(const std::string& path);

}  // namespace nighttrack
