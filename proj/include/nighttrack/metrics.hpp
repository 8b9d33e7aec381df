#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "nighttrack/box.hpp"

namespace nighttrack {

// One-pass evaluation record for a sequence. Frame 0 is the initialization
// frame: its prediction equals groundtruth and it is excluded from scoring.
struct TrackRun {
    std::string sequence;
    std::vector<Box> predictions;  // pixel frame
    std::vector<Box> groundtruth;  // pixel frame
    std::vector<double> cle_series;
    std::vector<double> iou_series;
    std::vector<std::string> attributes;
    int degenerate_predictions = 0;

    void validate() const;  // equal lengths, init frame convention
};

// Computes CLE/IoU series from the box lists.
void fill_series(TrackRun& run);

struct Curve {
    std::vector<double> thresholds;
    std::vector<double> rates;
};

struct MetricsReport {
    Curve success;         // IoU > t, 21 thresholds 0..1 step 0.05
    double success_score = 0.0;  // mean of the curve
    Curve precision;       // CLE <= tau, 51 thresholds 0..50 step 1
    double precision_score = 0.0;  // rate at tau = 20
    Curve norm_precision;  // hypot(dcx/w_gt, dcy/h_gt) <= tau, 0..0.5 step 0.01
    double norm_precision_score = 0.0;  // mean of the curve
    double mean_iou = 0.0;
    double mean_cle = 0.0;
    int64_t frames_scored = 0;
    int64_t skipped_zero_gt = 0;  // frames skipped in norm precision
};

// Pooled over all scored frames of all runs, so results are independent of
// evaluation order.
MetricsReport compute_metrics(const std::vector<TrackRun>& runs);

// Per-attribute reports over the runs carrying each tag. Runs without any
// tag are grouped under "untagged"; tags with no runs are omitted.
std::map<std::string, MetricsReport> attribute_report(const std::vector<TrackRun>& runs);

nlohmann::ordered_json report_to_json(const MetricsReport& overall,
                                      const std::map<std::string, MetricsReport>& by_attribute,
                                      const std::vector<TrackRun>& runs);

// Companion CSVs, one per curve: "<base>.success.csv" etc.
void write_curve_csvs(const MetricsReport& report, const std::string& base_path);

}  // namespace nighttrack
