#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "nighttrack/metrics.hpp"
#include "nighttrack/rng.hpp"
#include "nighttrack/runner.hpp"
#include "nighttrack/synth.hpp"

using namespace nighttrack;

namespace {

// Brute-force metric oracle: plain per-frame counting, no shared code with
// the production metric path beyond the box helpers.
struct BruteScores {
    double success_score = 0.0;
    double precision_score = 0.0;
    double norm_precision_score = 0.0;
};

BruteScores brute_force(const std::vector<TrackRun>& runs) {
    std::vector<double> ious, cles, nds;
    for (const auto& run : runs) {
        for (size_t i = 1; i < run.predictions.size(); ++i) {
            const Box& p = run.predictions[i];
            const Box& g = run.groundtruth[i];
            const double iw = std::max(0.0, std::min(p.x2, g.x2) - std::max(p.x1, g.x1));
            const double ih = std::max(0.0, std::min(p.y2, g.y2) - std::max(p.y1, g.y1));
            const double inter = iw * ih;
            const double ap = std::max(0.0, p.x2 - p.x1) * std::max(0.0, p.y2 - p.y1);
            const double ag = std::max(0.0, g.x2 - g.x1) * std::max(0.0, g.y2 - g.y1);
            const double uni = ap + ag - inter;
            ious.push_back(uni > 0.0 ? inter / uni : 0.0);
            const double dx = 0.5 * (p.x1 + p.x2) - 0.5 * (g.x1 + g.x2);
            const double dy = 0.5 * (p.y1 + p.y2) - 0.5 * (g.y1 + g.y2);
            cles.push_back(std::sqrt(dx * dx + dy * dy));
            if (g.x2 - g.x1 > 0.0 && g.y2 - g.y1 > 0.0) {
                const double nx = dx / (g.x2 - g.x1), ny = dy / (g.y2 - g.y1);
                nds.push_back(std::sqrt(nx * nx + ny * ny));
            }
        }
    }
    BruteScores out;
    double acc = 0.0;
    for (int t = 0; t <= 20; ++t) {
        int count = 0;
        for (double v : ious) {
            if (v > t * 0.05) count += 1;
        }
        acc += static_cast<double>(count) / static_cast<double>(ious.size());
    }
    out.success_score = acc / 21.0;
    int count20 = 0;
    for (double v : cles) {
        if (v <= 20.0) count20 += 1;
    }
    out.precision_score = static_cast<double>(count20) / static_cast<double>(cles.size());
    acc = 0.0;
    for (int t = 0; t <= 50; ++t) {
        int count = 0;
        for (double v : nds) {
            if (v <= t * 0.01) count += 1;
        }
        acc += static_cast<double>(count) / static_cast<double>(nds.size());
    }
    out.norm_precision_score = acc / 51.0;
    return out;
}

TrackRun run_from_iou_cle(const std::string& name, const std::vector<double>& ious_wanted) {
    // Builds a run whose per-frame IoUs equal the requested values, using
    // width-w boxes shifted horizontally: IoU = (w - d) / (w + d).
    TrackRun run;
    run.sequence = name;
    const double w = 40.0, h = 40.0;
    run.groundtruth.push_back(Box::from_xywh(50, 50, w, h, BoxFrame::pixel));
    run.predictions.push_back(run.groundtruth[0]);
    for (double target : ious_wanted) {
        run.groundtruth.push_back(Box::from_xywh(50, 50, w, h, BoxFrame::pixel));
        const double d = target > 0.0 ? w * (1.0 - target) / (1.0 + target) : w * 2.0;
        run.predictions.push_back(Box::from_xywh(50 + d, 50, w, h, BoxFrame::pixel));
    }
    fill_series(run);
    return run;
}

TrackRun random_run(Rng& rng, int frames, const std::string& name) {
    TrackRun run;
    run.sequence = name;
    for (int i = 0; i < frames; ++i) {
        const double gx = rng.uniform(10, 200), gy = rng.uniform(10, 200);
        const double gw = rng.uniform(5, 60), gh = rng.uniform(5, 60);
        run.groundtruth.push_back(Box::from_xywh(gx, gy, gw, gh, BoxFrame::pixel));
        if (i == 0) {
            run.predictions.push_back(run.groundtruth[0]);
        } else {
            run.predictions.push_back(Box::from_xywh(gx + rng.uniform(-30, 30),
                                                     gy + rng.uniform(-30, 30),
                                                     gw * rng.uniform(0.5, 1.5),
                                                     gh * rng.uniform(0.5, 1.5), BoxFrame::pixel));
        }
    }
    fill_series(run);
    return run;
}

}  // namespace

TEST_CASE("cle") {
    Box a = Box::from_xywh(0, 0, 10, 10, BoxFrame::pixel);
    CHECK(cle(a, a) == 0.0);
    Box b = Box::from_corners(-2, -3, 8, 11, BoxFrame::pixel);  // center (3,4)
    Box o = Box::from_corners(-5, -5, 5, 5, BoxFrame::pixel);   // center (0,0)
    CHECK(cle(b, o) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(cle(b, o) == cle(o, b));
}

TEST_CASE("success score edges") {
    SUBCASE("perfect overlap scores 20/21 under strict inequality") {
        TrackRun run;
        run.sequence = "perfect";
        for (int i = 0; i < 6; ++i) {
            run.groundtruth.push_back(Box::from_xywh(10, 10, 20, 20, BoxFrame::pixel));
            run.predictions.push_back(run.groundtruth.back());
        }
        fill_series(run);
        MetricsReport r = compute_metrics({run});
        CHECK(r.success_score == doctest::Approx(20.0 / 21.0).epsilon(1e-15));
        CHECK(r.precision_score == 1.0);
        CHECK(r.norm_precision_score == 1.0);
    }
    SUBCASE("zero overlap scores zero") {
        TrackRun run;
        run.sequence = "lost";
        run.groundtruth.push_back(Box::from_xywh(10, 10, 5, 5, BoxFrame::pixel));
        run.predictions.push_back(run.groundtruth[0]);
        for (int i = 0; i < 5; ++i) {
            run.groundtruth.push_back(Box::from_xywh(10, 10, 5, 5, BoxFrame::pixel));
            run.predictions.push_back(Box::from_xywh(100, 100, 5, 5, BoxFrame::pixel));
        }
        fill_series(run);
        CHECK(compute_metrics({run}).success_score == 0.0);
    }
    SUBCASE("hand-made run matches the brute-force oracle") {
        TrackRun run = run_from_iou_cle("hand", {0.9, 0.6, 0.3, 0.0, 0.75});
        MetricsReport r = compute_metrics({run});
        BruteScores b = brute_force({run});
        CHECK(r.success_score == b.success_score);
        CHECK(r.precision_score == b.precision_score);
        CHECK(r.norm_precision_score == b.norm_precision_score);
    }
}

TEST_CASE("precision score edges") {
    TrackRun run;
    run.sequence = "cle25";
    run.groundtruth.push_back(Box::from_xywh(50, 50, 10, 10, BoxFrame::pixel));
    run.predictions.push_back(run.groundtruth[0]);
    for (int i = 0; i < 4; ++i) {
        run.groundtruth.push_back(Box::from_xywh(50, 50, 10, 10, BoxFrame::pixel));
        run.predictions.push_back(Box::from_xywh(75, 50, 10, 10, BoxFrame::pixel));  // CLE 25
    }
    fill_series(run);
    MetricsReport r = compute_metrics({run});
    CHECK(r.precision_score == 0.0);  // at tau = 20
    CHECK(r.precision.rates[24] == 0.0);
    CHECK(r.precision.rates[25] == 1.0);
    CHECK(r.precision.rates[50] == 1.0);
}

TEST_CASE("normalized precision edges") {
    TrackRun run;
    run.sequence = "halfwidth";
    run.groundtruth.push_back(Box::from_xywh(0, 0, 30, 20, BoxFrame::pixel));
    run.predictions.push_back(run.groundtruth[0]);
    run.groundtruth.push_back(Box::from_xywh(0, 0, 30, 20, BoxFrame::pixel));
    run.predictions.push_back(Box::from_xywh(15, 0, 30, 20, BoxFrame::pixel));  // dx = 0.5 * w
    fill_series(run);
    MetricsReport r = compute_metrics({run});
    for (int t = 0; t < 50; ++t) CHECK(r.norm_precision.rates[static_cast<size_t>(t)] == 0.0);
    CHECK(r.norm_precision.rates[50] == 1.0);
    CHECK(r.norm_precision_score == doctest::Approx(1.0 / 51.0).epsilon(1e-15));
}

TEST_CASE("random runs match the brute-force oracle exactly") {
    Rng rng(5);
    std::vector<TrackRun> runs;
    for (int i = 0; i < 10; ++i) {
        runs.push_back(random_run(rng, 2 + static_cast<int>(rng.uniform_int(99)), "r" + std::to_string(i)));
    }
    MetricsReport r = compute_metrics(runs);
    BruteScores b = brute_force(runs);
    CHECK(r.success_score == b.success_score);
    CHECK(r.precision_score == b.precision_score);
    CHECK(r.norm_precision_score == b.norm_precision_score);

    SUBCASE("curves are monotone") {
        for (size_t i = 1; i < r.success.rates.size(); ++i) {
            CHECK(r.success.rates[i] <= r.success.rates[i - 1]);
        }
        for (size_t i = 1; i < r.precision.rates.size(); ++i) {
            CHECK(r.precision.rates[i] >= r.precision.rates[i - 1]);
        }
        for (size_t i = 1; i < r.norm_precision.rates.size(); ++i) {
            CHECK(r.norm_precision.rates[i] >= r.norm_precision.rates[i - 1]);
        }
    }
    SUBCASE("scores are invariant to evaluation order") {
        std::vector<TrackRun> shuffled = runs;
        std::reverse(shuffled.begin(), shuffled.end());
        MetricsReport r2 = compute_metrics(shuffled);
        CHECK(r2.success_score == r.success_score);
        CHECK(r2.precision_score == r.precision_score);
        CHECK(r2.norm_precision_score == r.norm_precision_score);
        CHECK(r2.mean_iou == r.mean_iou);
    }
}

TEST_CASE("attribute reports") {
    Rng rng(9);
    std::vector<TrackRun> runs;
    for (int i = 0; i < 6; ++i) {
        TrackRun run = random_run(rng, 20, "s" + std::to_string(i));
        run.attributes = {i % 2 == 0 ? "tag-a" : "tag-b"};
        runs.push_back(std::move(run));
    }

    SUBCASE("one shared tag reproduces the overall report") {
        std::vector<TrackRun> same = runs;
        for (auto& r : same) r.attributes = {"only"};
        auto by_attr = attribute_report(same);
        REQUIRE(by_attr.count("only"));
        MetricsReport overall = compute_metrics(same);
        CHECK(by_attr["only"].success_score == overall.success_score);
        CHECK(by_attr["only"].frames_scored == overall.frames_scored);
    }
    SUBCASE("disjoint tags partition the frames and recombine to the overall") {
        auto by_attr = attribute_report(runs);
        REQUIRE(by_attr.count("tag-a"));
        REQUIRE(by_attr.count("tag-b"));
        MetricsReport overall = compute_metrics(runs);
        CHECK(by_attr["tag-a"].frames_scored + by_attr["tag-b"].frames_scored ==
              overall.frames_scored);
        // Frame-weighted recombination of the pooled rates.
        const double combined =
            (by_attr["tag-a"].success_score * static_cast<double>(by_attr["tag-a"].frames_scored) +
             by_attr["tag-b"].success_score * static_cast<double>(by_attr["tag-b"].frames_scored)) /
            static_cast<double>(overall.frames_scored);
        CHECK(combined == doctest::Approx(overall.success_score).epsilon(1e-12));
    }
    SUBCASE("runs without tags group under 'untagged' and empty tags are omitted") {
        std::vector<TrackRun> mixed = runs;
        mixed[0].attributes = {};
        auto by_attr = attribute_report(mixed);
        CHECK(by_attr.count("untagged") == 1);
        CHECK(by_attr.count("never-used") == 0);
    }
}

TEST_CASE("zero-size groundtruth frames are skipped in normalized precision") {
    TrackRun run;
    run.sequence = "zerogt";
    run.groundtruth.push_back(Box::from_xywh(10, 10, 8, 8, BoxFrame::pixel));
    run.predictions.push_back(run.groundtruth[0]);
    for (int i = 0; i < 3; ++i) {
        run.groundtruth.push_back(i == 1 ? Box::from_xywh(10, 10, 0, 8, BoxFrame::pixel)
                                         : Box::from_xywh(10, 10, 8, 8, BoxFrame::pixel));
        run.predictions.push_back(Box::from_xywh(11, 10, 8, 8, BoxFrame::pixel));
    }
    fill_series(run);
    MetricsReport r = compute_metrics({run});
    CHECK(r.skipped_zero_gt == 1);
    CHECK(r.frames_scored == 3);
    CHECK(r.norm_precision.rates[50] == 1.0);  // two valid frames, both close
}

TEST_CASE("run length mismatch is an EvalError naming the sequence") {
    TrackRun run;
    run.sequence = "shorty";
    run.groundtruth.push_back(Box::from_xywh(0, 0, 5, 5, BoxFrame::pixel));
    run.groundtruth.push_back(Box::from_xywh(0, 0, 5, 5, BoxFrame::pixel));
    run.predictions.push_back(run.groundtruth[0]);
    try {
        compute_metrics({run});
        FAIL("expected EvalError");
    } catch (const EvalError& e) {
        CHECK(std::string(e.what()).find("shorty") != std::string::npos);
    }
}

TEST_CASE("run_tracker") {
    SceneConfig sc;
    sc.frame_count = 8;
    sc.frame_width = 64;
    sc.frame_height = 64;
    sc.object_width = 14;
    sc.object_height = 12;
    sc.motion_sigma = 1.0;
    sc.rng_seed = 21;
    Sequence seq = synth_scene(sc);
    seq.name = "probe";
    SamplingConfig cfg;
    cfg.template_size = 16;
    cfg.search_size = 32;

    SUBCASE("frame one equals groundtruth by construction") {
        BoxPredictor center = [](const Image&, const Image&) {
            return Box::from_corners(0.4, 0.4, 0.6, 0.6, BoxFrame::search_norm);
        };
        TrackRun run = run_tracker_with(center, seq, cfg);
        CHECK(run.predictions[0].x1 == seq.groundtruth[0].x1);
        CHECK(run.iou_series[0] == 1.0);
        CHECK(run.predictions.size() == seq.frames.size());
    }
    SUBCASE("identical runs produce identical boxes") {
        BoxPredictor wobble = [](const Image& t, const Image& s) {
            const double v = 0.3 + 0.2 * s.rgb[100] + 0.1 * t.rgb[50];
            return Box::from_corners(v - 0.1, v - 0.12, v + 0.1, v + 0.12, BoxFrame::search_norm);
        };
        TrackRun a = run_tracker_with(wobble, seq, cfg);
        TrackRun b = run_tracker_with(wobble, seq, cfg);
        for (size_t i = 0; i < a.predictions.size(); ++i) {
            CHECK(a.predictions[i].x1 == b.predictions[i].x1);
            CHECK(a.predictions[i].y2 == b.predictions[i].y2);
        }
    }
    SUBCASE("degenerate predictions fall back to the previous box") {
        int calls = 0;
        BoxPredictor sometimes_bad = [&calls](const Image&, const Image&) {
            calls += 1;
            if (calls == 2) {
                // Inverted box: degenerate after regularization.
                return Box::from_corners(0.7, 0.7, 0.3, 0.3, BoxFrame::search_norm);
            }
            return Box::from_corners(0.45, 0.45, 0.55, 0.55, BoxFrame::search_norm);
        };
        TrackRun run = run_tracker_with(sometimes_bad, seq, cfg);
        CHECK(run.degenerate_predictions == 1);
        // The degenerate frame reuses the previous prediction.
        CHECK(run.predictions[2].x1 == run.predictions[1].x1);
        CHECK(run.predictions[2].y2 == run.predictions[1].y2);
    }
    SUBCASE("box files round trip") {
        BoxPredictor center = [](const Image&, const Image&) {
            return Box::from_corners(0.41, 0.42, 0.63, 0.64, BoxFrame::search_norm);
        };
        TrackRun run = run_tracker_with(center, seq, cfg);
        const std::string path = (std::filesystem::temp_directory_path() / "boxes_probe.txt").string();
        write_boxes(run, path);
        std::vector<Box> loaded = read_boxes(path);
        REQUIRE(loaded.size() == run.predictions.size());
        for (size_t i = 0; i < loaded.size(); ++i) {
            CHECK(std::abs(loaded[i].x1 - run.predictions[i].x1) < 5e-4 + 1e-12);
            CHECK(std::abs(loaded[i].width() - run.predictions[i].width()) < 5e-4 + 1e-12);
        }
    }
}
