#include "nighttrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace nighttrack {

void TrackRun::validate() const {
    if (predictions.size() != groundtruth.size()) {
        throw EvalError("run '" + sequence + "': prediction/groundtruth length mismatch (" +
                        std::to_string(predictions.size()) + " vs " +
                        std::to_string(groundtruth.size()) + ")");
    }
    if (predictions.empty()) throw EvalError("run '" + sequence + "': empty run");
    if (!cle_series.empty() &&
        (cle_series.size() != predictions.size() || iou_series.size() != predictions.size())) {
        throw EvalError("run '" + sequence + "': series length mismatch");
    }
}

void fill_series(TrackRun& run) {
    run.cle_series.clear();
    run.iou_series.clear();
    for (size_t i = 0; i < run.predictions.size(); ++i) {
        run.cle_series.push_back(cle(run.predictions[i], run.groundtruth[i]));
        run.iou_series.push_back(iou(run.predictions[i], run.groundtruth[i]));
    }
}

namespace {

constexpr int kSuccessBins = 21;
constexpr int kPrecisionBins = 51;
constexpr int kNormPrecisionBins = 51;

}  // namespace

MetricsReport compute_metrics(const std::vector<TrackRun>& runs) {
    MetricsReport r;
    r.success.thresholds.resize(kSuccessBins);
    for (int i = 0; i < kSuccessBins; ++i) r.success.thresholds[static_cast<size_t>(i)] = i * 0.05;
    r.precision.thresholds.resize(kPrecisionBins);
    for (int i = 0; i < kPrecisionBins; ++i) r.precision.thresholds[static_cast<size_t>(i)] = i;
    r.norm_precision.thresholds.resize(kNormPrecisionBins);
    for (int i = 0; i < kNormPrecisionBins; ++i) {
        r.norm_precision.thresholds[static_cast<size_t>(i)] = i * 0.01;
    }

    std::vector<int64_t> succ(kSuccessBins, 0), prec(kPrecisionBins, 0), nprec(kNormPrecisionBins, 0);
    int64_t frames = 0, nprec_frames = 0;
    double iou_sum = 0.0, cle_sum = 0.0;

    for (const TrackRun& run : runs) {
        run.validate();
        // Init frame excluded from every denominator.
        for (size_t i = 1; i < run.predictions.size(); ++i) {
            const Box& p = run.predictions[i];
            const Box& g = run.groundtruth[i];
            const double iou_v = run.iou_series.empty() ? iou(p, g) : run.iou_series[i];
            const double cle_v = run.cle_series.empty() ? cle(p, g) : run.cle_series[i];
            frames += 1;
            iou_sum += iou_v;
            cle_sum += cle_v;
            for (int t = 0; t < kSuccessBins; ++t) {
                if (iou_v > t * 0.05) succ[static_cast<size_t>(t)] += 1;
            }
            for (int t = 0; t < kPrecisionBins; ++t) {
                if (cle_v <= static_cast<double>(t)) prec[static_cast<size_t>(t)] += 1;
            }
            if (g.width() > 0.0 && g.height() > 0.0) {
                const double nd = std::hypot((p.cx() - g.cx()) / g.width(),
                                             (p.cy() - g.cy()) / g.height());
                nprec_frames += 1;
                for (int t = 0; t < kNormPrecisionBins; ++t) {
                    if (nd <= t * 0.01) nprec[static_cast<size_t>(t)] += 1;
                }
            } else {
                r.skipped_zero_gt += 1;
            }
        }
    }

    r.frames_scored = frames;
    r.success.rates.resize(kSuccessBins, 0.0);
    r.precision.rates.resize(kPrecisionBins, 0.0);
    r.norm_precision.rates.resize(kNormPrecisionBins, 0.0);
    if (frames > 0) {
        for (int t = 0; t < kSuccessBins; ++t) {
            r.success.rates[static_cast<size_t>(t)] =
                static_cast<double>(succ[static_cast<size_t>(t)]) / static_cast<double>(frames);
        }
        for (int t = 0; t < kPrecisionBins; ++t) {
            r.precision.rates[static_cast<size_t>(t)] =
                static_cast<double>(prec[static_cast<size_t>(t)]) / static_cast<double>(frames);
        }
        r.mean_iou = iou_sum / static_cast<double>(frames);
        r.mean_cle = cle_sum / static_cast<double>(frames);
    }
    if (nprec_frames > 0) {
        for (int t = 0; t < kNormPrecisionBins; ++t) {
            r.norm_precision.rates[static_cast<size_t>(t)] =
                static_cast<double>(nprec[static_cast<size_t>(t)]) / static_cast<double>(nprec_frames);
        }
    }

    double s = 0.0;
    for (double v : r.success.rates) s += v;
    r.success_score = s / kSuccessBins;
    r.precision_score = r.precision.rates[20];
    double np = 0.0;
    for (double v : r.norm_precision.rates) np += v;
    r.norm_precision_score = np / kNormPrecisionBins;
    return r;
}

std::map<std::string, MetricsReport> attribute_report(const std::vector<TrackRun>& runs) {
    std::map<std::string, std::vector<TrackRun>> grouped;
    for (const TrackRun& run : runs) {
        if (run.attributes.empty()) {
            grouped["untagged"].push_back(run);
            continue;
        }
        for (const std::string& tag : run.attributes) grouped[tag].push_back(run);
    }
    std::map<std::string, MetricsReport> out;
    for (const auto& [tag, group] : grouped) out[tag] = compute_metrics(group);
    return out;
}

namespace {

nlohmann::ordered_json metrics_to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["success_score"] = r.success_score;
    j["precision_score"] = r.precision_score;
    j["norm_precision_score"] = r.norm_precision_score;
    j["mean_iou"] = r.mean_iou;
    j["mean_cle"] = r.mean_cle;
    j["frames_scored"] = r.frames_scored;
    j["skipped_zero_gt"] = r.skipped_zero_gt;
    j["success_curve"] = r.success.rates;
    j["precision_curve"] = r.precision.rates;
    j["norm_precision_curve"] = r.norm_precision.rates;
    return j;
}

void write_curve_csv(const Curve& c, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("write_curve_csv: cannot open " + path);
    f << "threshold,rate\n";
    char buf[80];
    for (size_t i = 0; i < c.thresholds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", c.thresholds[i], c.rates[i]);
        f << buf;
    }
}

}  // namespace

nlohmann::ordered_json report_to_json(const MetricsReport& overall,
                                      const std::map<std::string, MetricsReport>& by_attribute,
                                      const std::vector<TrackRun>& runs) {
    nlohmann::ordered_json j;
    j["overall"] = metrics_to_json(overall);
    j["sequences"] = nlohmann::ordered_json::array();
    for (const TrackRun& run : runs) {
        MetricsReport r = compute_metrics({run});
        nlohmann::ordered_json e;
        e["name"] = run.sequence;
        e["frames_scored"] = r.frames_scored;
        e["mean_iou"] = r.mean_iou;
        e["success_score"] = r.success_score;
        e["precision_score"] = r.precision_score;
        e["norm_precision_score"] = r.norm_precision_score;
        e["degenerate_predictions"] = run.degenerate_predictions;
        j["sequences"].push_back(e);
    }
    j["attributes"] = nlohmann::ordered_json::object();
    for (const auto& [tag, r] : by_attribute) j["attributes"][tag] = metrics_to_json(r);
    return j;
}

void write_curve_csvs(const MetricsReport& report, const std::string& base_path) {
    write_curve_csv(report.success, base_path + ".success.csv");
    write_curve_csv(report.precision, base_path + ".precision.csv");
    write_curve_csv(report.norm_precision, base_path + ".norm_precision.csv");
}

}  // namespace nighttrack
