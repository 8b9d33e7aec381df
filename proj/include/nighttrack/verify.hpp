#pragma once

#include <cstdint>

#include "nighttrack/gradcheck.hpp"
#include "nighttrack/model.hpp"

namespace nighttrack {

struct TrackingGradcheck {
    FdReport report;
    double box[4] = {0, 0, 0, 0};  // evaluation-point prediction
    double eps = 0.0;
};

// Full-loss gradient check on the tiny configuration: prompt parameters are
// randomized so every class carries a live gradient, backbone and head are
// frozen as in prompt tuning, and the loss is the weighted L1+GIoU tracking
// loss on a synthetic night pair.
//
// The loss has clamp kinks where the predicted box degenerates; central
// differences are only meaningful away from them, so the (frozen) head is
// deterministically rescaled until the evaluation-point box is well-formed.
TrackingGradcheck run_tracking_gradcheck(uint64_t seed, double eps);

// Parameter class used for per-class reporting: conv weights, offsets,
// alpha, beta, chain gates, token gates.
std::string prompt_param_class(const std::string& name);

}  // namespace nighttrack
