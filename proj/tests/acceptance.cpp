// Acceptance suite: every criterion prints one [PASS]/[FAIL] line; the
// process exits nonzero if any criterion fails. Heavier stages drive the
// real CLI binary (path via --cli) so the checked surface is the shipped
// one.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nighttrack/checkpoint.hpp"
#include "nighttrack/dataset.hpp"
#include "nighttrack/metrics.hpp"
#include "nighttrack/model.hpp"
#include "nighttrack/objective.hpp"
#include "nighttrack/rng.hpp"
#include "nighttrack/runner.hpp"
#include "nighttrack/train.hpp"
#include "nighttrack/verify.hpp"

namespace fs = std::filesystem;
using namespace nighttrack;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_cli;
fs::path g_work;
int g_failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int criterion, const std::string& name, bool pass, const std::string& detail,
            double elapsed) {
    std::printf("[%s] criterion %d: %s — %s (%.1f s)\n", pass ? "PASS" : "FAIL", criterion,
                name.c_str(), detail.c_str(), elapsed);
    std::fflush(stdout);
    if (!pass) g_failures += 1;
}

void run_criterion(int criterion, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = Clock::now();
    bool pass = false;
    std::string detail;
    try {
        auto [ok, text] = body();
        pass = ok;
        detail = text;
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    report(criterion, name, pass, detail, seconds_since(t0));
}

int cli(const std::string& args) {
    const std::string cmd = g_cli + " " + args + " > " + (g_work / "cli.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw DataError("acceptance: cannot open " + p.string());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

bool files_equal(const fs::path& a, const fs::path& b) { return read_file(a) == read_file(b); }

bool dirs_equal(const fs::path& a, const fs::path& b, std::string* why) {
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
    }
    std::sort(rel.begin(), rel.end());
    for (const auto& r : rel) {
        if (!fs::exists(b / r) || !files_equal(a / r, b / r)) {
            *why = r.string();
            return false;
        }
    }
    return true;
}

// Byte ranges of each parameter's f32 payload inside a checkpoint file.
struct PayloadIndex {
    std::string bytes;
    size_t payload_off = 0;
    nlohmann::json manifest;

    static PayloadIndex open(const fs::path& path) {
        PayloadIndex idx;
        idx.bytes = read_file(path);
        uint64_t mlen = 0;
        for (int i = 0; i < 8; ++i) {
            mlen |= static_cast<uint64_t>(static_cast<unsigned char>(idx.bytes[8 + static_cast<size_t>(i)]))
                    << (8 * i);
        }
        idx.manifest = nlohmann::json::parse(idx.bytes.substr(16, mlen));
        idx.payload_off = 16 + static_cast<size_t>(mlen);
        return idx;
    }

    // tag -> concatenated parameter bytes, in manifest order.
    std::string tag_bytes(const std::string& tag) const {
        std::string out;
        for (const auto& e : manifest.at("params")) {
            if (e.at("tag").get<std::string>() != tag) continue;
            const size_t off = payload_off + e.at("offset").get<size_t>() * 4;
            const size_t len = e.at("numel").get<size_t>() * 4;
            out += bytes.substr(off, len);
        }
        return out;
    }
};

// Independent per-frame counting oracle for the metric criterion.
struct BruteScores {
    double success = 0.0, precision = 0.0, norm_precision = 0.0;
};

BruteScores brute_force_scores(const std::vector<TrackRun>& runs) {
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
            if (g.x2 > g.x1 && g.y2 > g.y1) {
                const double nx = dx / (g.x2 - g.x1), ny = dy / (g.y2 - g.y1);
                nds.push_back(std::sqrt(nx * nx + ny * ny));
            }
        }
    }
    BruteScores out;
    double acc = 0.0;
    for (int t = 0; t <= 20; ++t) {
        int c = 0;
        for (double v : ious) c += v > t * 0.05 ? 1 : 0;
        acc += static_cast<double>(c) / static_cast<double>(ious.size());
    }
    out.success = acc / 21.0;
    int c20 = 0;
    for (double v : cles) c20 += v <= 20.0 ? 1 : 0;
    out.precision = static_cast<double>(c20) / static_cast<double>(cles.size());
    acc = 0.0;
    for (int t = 0; t <= 50; ++t) {
        int c = 0;
        for (double v : nds) c += v <= t * 0.01 ? 1 : 0;
        acc += static_cast<double>(c) / static_cast<double>(nds.size());
    }
    out.norm_precision = acc / 51.0;
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::strcmp(argv[i], "--cli") == 0) g_cli = argv[i + 1];
        if (std::strcmp(argv[i], "--workdir") == 0) g_work = argv[i + 1];
    }
    if (g_cli.empty()) {
        std::fprintf(stderr, "usage: acceptance --cli <nighttrack binary> [--workdir DIR]\n");
        return 2;
    }
    if (g_work.empty()) g_work = fs::temp_directory_path() / "nighttrack_acceptance";
    fs::remove_all(g_work);
    fs::create_directories(g_work);
    const auto suite_start = Clock::now();

    // --- criterion 6: GIoU oracle -------------------------------------
    run_criterion(6, "objective oracle", []() -> std::pair<bool, std::string> {
        const Box a = Box::from_corners(0, 0, 2, 2, BoxFrame::pixel);
        const Box b = Box::from_corners(1, 1, 3, 3, BoxFrame::pixel);
        const double v = giou(a, b).value;
        if (std::abs(v - (-5.0 / 63.0)) >= 1e-12) {
            return {false, "giou((0,0,2,2),(1,1,3,3)) = " + fmt(v)};
        }
        Rng rng(60601);
        int degenerate = 0;
        for (int i = 0; i < 10000; ++i) {
            auto rand_box = [&rng]() {
                const double x1 = rng.uniform(-2.0, 2.0), y1 = rng.uniform(-2.0, 2.0);
                double w = rng.uniform(-0.3, 1.5), h = rng.uniform(-0.3, 1.5);
                if (rng.uniform() < 0.05) w = 0.0;
                if (rng.uniform() < 0.05) h = 0.0;
                return Box::from_corners(x1, y1, x1 + w, y1 + h, BoxFrame::pixel);
            };
            const Box p = rand_box(), q = rand_box();
            const GiouResult pq = giou(p, q), qp = giou(q, p);
            if (pq.value != qp.value || pq.degenerate != qp.degenerate) {
                return {false, "symmetry violated at trial " + std::to_string(i)};
            }
            if (!(pq.value > -1.0 && pq.value <= 1.0)) {
                return {false, "range violated: " + fmt(pq.value)};
            }
            if (pq.degenerate) {
                degenerate += 1;
                if (pq.value != 0.0) return {false, "degenerate pair did not return 0"};
            }
        }
        return {true, "-5/63 exact; 10000 random pairs symmetric and in range (" +
                          std::to_string(degenerate) + " degenerate)"};
    });

    // --- criterion 7: metric oracle equivalence ------------------------
    run_criterion(7, "metric oracle equivalence", []() -> std::pair<bool, std::string> {
        Rng rng(70701);
        std::vector<TrackRun> all;
        for (int r = 0; r < 50; ++r) {
            TrackRun run;
            run.sequence = "r" + std::to_string(r);
            const int frames = 2 + static_cast<int>(rng.uniform_int(99));
            for (int i = 0; i < frames; ++i) {
                const double gx = rng.uniform(0, 300), gy = rng.uniform(0, 300);
                const double gw = rng.uniform(4, 80), gh = rng.uniform(4, 80);
                run.groundtruth.push_back(Box::from_xywh(gx, gy, gw, gh, BoxFrame::pixel));
                if (i == 0) {
                    run.predictions.push_back(run.groundtruth[0]);
                } else {
                    run.predictions.push_back(
                        Box::from_xywh(gx + rng.uniform(-50, 50), gy + rng.uniform(-50, 50),
                                       gw * rng.uniform(0.3, 1.8), gh * rng.uniform(0.3, 1.8),
                                       BoxFrame::pixel));
                }
            }
            fill_series(run);
            all.push_back(std::move(run));

            MetricsReport m = compute_metrics({all.back()});
            BruteScores b = brute_force_scores({all.back()});
            if (m.success_score != b.success || m.precision_score != b.precision ||
                m.norm_precision_score != b.norm_precision) {
                return {false, "per-run scores differ from brute force at run " + std::to_string(r)};
            }
        }
        MetricsReport m = compute_metrics(all);
        BruteScores b = brute_force_scores(all);
        if (m.success_score != b.success || m.precision_score != b.precision ||
            m.norm_precision_score != b.norm_precision) {
            return {false, "pooled scores differ from brute force"};
        }
        for (size_t i = 1; i < m.success.rates.size(); ++i) {
            if (m.success.rates[i] > m.success.rates[i - 1]) return {false, "success curve not non-increasing"};
        }
        for (size_t i = 1; i < m.precision.rates.size(); ++i) {
            if (m.precision.rates[i] < m.precision.rates[i - 1]) return {false, "precision curve not non-decreasing"};
        }
        for (size_t i = 1; i < m.norm_precision.rates.size(); ++i) {
            if (m.norm_precision.rates[i] < m.norm_precision.rates[i - 1]) {
                return {false, "norm precision curve not non-decreasing"};
            }
        }
        return {true, "50 runs equal brute force exactly; curves monotone"};
    });

    // --- criterion 5: trainable-fraction report ------------------------
    run_criterion(5, "trainable-fraction report", []() -> std::pair<bool, std::string> {
        TrackerModel model = TrackerModel::init(ModelConfig::desk(AblationProfile::dcp_gfa_full()), 1);
        auto counts = model.params().count([](const Param& p) {
            return p.tag == ParamTag::dcp || p.tag == ParamTag::gfa;
        });
        std::ostringstream os;
        os << "desk model: " << counts.selected << " prompt of " << counts.total << " total = "
           << fmt(100.0 * counts.fraction()) << "% (full-scale reference: 3.03M/89.96M = 3.3%)";
        return {counts.fraction() < 0.15, os.str()};
    });

    // --- criterion 1: gradient correctness ------------------------------
    run_criterion(1, "gradient correctness", []() -> std::pair<bool, std::string> {
        const auto t0 = Clock::now();
        TrackingGradcheck r = run_tracking_gradcheck(5, 1e-4);
        const double elapsed = seconds_since(t0);
        std::ostringstream os;
        bool pass = elapsed < 60.0;
        os << "max rel err " << fmt(r.report.max_rel_error) << " over " << r.report.coords_checked
           << " coords [";
        bool first = true;
        for (const auto& [cls, stat] : r.report.by_class) {
            if (!first) os << ", ";
            first = false;
            os << cls << " " << fmt(stat.max_rel_error);
            if (stat.max_rel_error >= 1e-4) pass = false;
        }
        os << "]";
        if (r.report.max_rel_error >= 1e-4) pass = false;
        return {pass, os.str()};
    });

    // --- criterion 3: zero-init baseline equivalence --------------------
    run_criterion(3, "zero-init baseline equivalence", []() -> std::pair<bool, std::string> {
        TrackerModel base = TrackerModel::init(ModelConfig::small(), 301);
        TrackerModel prompted =
            TrackerModel::from_base(ModelConfig::small(AblationProfile::dcp_gfa_full()), base.params());
        Rng rng(302);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> ti(static_cast<size_t>(3 * 32 * 32)), si(static_cast<size_t>(3 * 64 * 64));
            for (double& v : ti) v = rng.uniform();
            for (double& v : si) v = rng.uniform();
            Tensor tt = Tensor::from_data({3, 32, 32}, std::move(ti));
            Tensor ts = Tensor::from_data({3, 64, 64}, std::move(si));
            if (prompted.forward_tokens(tt, ts).tokens.data() != base.forward_tokens(tt, ts).tokens.data() ||
                prompted.forward_box(tt, ts).data() != base.forward_box(tt, ts).data()) {
                return {false, "outputs differ at input " + std::to_string(trial)};
            }
        }
        return {true, "10 random inputs bit-identical (tokens and box)"};
    });

    // --- criterion 8: end-to-end determinism ----------------------------
    run_criterion(8, "pipeline determinism", []() -> std::pair<bool, std::string> {
        auto run_pipeline = [&](const fs::path& root) {
            fs::create_directories(root);
            const std::string day = (root / "day").string();
            const std::string night = (root / "night").string();
            if (cli("gen-data --out " + day + " --seqs 3 --frames 14 --seed 81 --width 64 --height 64")) {
                throw Error("gen-data day failed");
            }
            if (cli("gen-data --out " + night + " --seqs 3 --frames 14 --seed 82 --night --width 64 --height 64")) {
                throw Error("gen-data night failed");
            }
            const std::string base = (root / "base.ckpt").string();
            if (cli("train-base --data " + day + " --out " + base +
                    " --model tiny --epochs 2 --pairs 32 --batch 8 --lr 1e-3 --seed 83")) {
                throw Error("train-base failed");
            }
            const std::string tuned = (root / "tuned.ckpt").string();
            if (cli("prompt-tune --base " + base + " --data " + night + " --out " + tuned +
                    " --profile dcp+gfa_full --epochs 2 --pairs 32 --batch 8 --seed 84")) {
                throw Error("prompt-tune failed");
            }
            const std::string boxes = (root / "boxes").string();
            if (cli("track --ckpt " + tuned + " --data " + night + " --out " + boxes)) {
                throw Error("track failed");
            }
            const std::string report = (root / "report.json").string();
            if (cli("eval --data " + night + " --boxes " + boxes + " --report " + report)) {
                throw Error("eval failed");
            }
        };
        // Identical commands (paths included) both times: the first run's
        // artifacts are snapshotted aside, then the pipeline repeats in the
        // same location.
        const fs::path root = g_work / "det";
        const fs::path snap = g_work / "det_snapshot";
        run_pipeline(root);
        fs::rename(root, snap);
        run_pipeline(root);

        std::string why;
        for (const char* dir : {"day", "night", "boxes"}) {
            if (!dirs_equal(snap / dir, root / dir, &why)) {
                return {false, std::string(dir) + " differs at " + why};
            }
        }
        for (const char* file : {"base.ckpt", "base.ckpt.log.csv", "tuned.ckpt",
                                 "tuned.ckpt.log.csv", "report.json", "report.json.success.csv",
                                 "report.json.precision.csv", "report.json.norm_precision.csv"}) {
            if (!files_equal(snap / file, root / file)) {
                return {false, std::string(file) + " differs between runs"};
            }
        }
        return {true, "datasets, checkpoints, logs, boxes and reports byte-identical across reruns"};
    });

    // --- criterion 4: ablation direction (and data for 2 and 9) ---------
    const fs::path abl = g_work / "ablation";
    bool ablation_ready = false;
    run_criterion(4, "ablation direction", [&]() -> std::pair<bool, std::string> {
        const auto t0 = Clock::now();
        fs::create_directories(abl);
        const std::string day = (abl / "day").string();
        const std::string night_train = (abl / "night_train").string();
        const std::string night_eval = (abl / "night_eval").string();
        if (cli("gen-data --out " + day + " --seqs 12 --frames 40 --seed 101")) {
            throw Error("gen-data day failed");
        }
        if (cli("gen-data --out " + night_train + " --seqs 8 --frames 40 --seed 202 --night")) {
            throw Error("gen-data night-train failed");
        }
        if (cli("gen-data --out " + night_eval + " --seqs 16 --frames 60 --seed 303 --night")) {
            throw Error("gen-data night-eval failed");
        }
        const std::string base = (abl / "base.ckpt").string();
        if (cli("train-base --data " + day + " --out " + base +
                " --model small --epochs 20 --pairs 384 --batch 16 --lr 1e-3 --seed 11")) {
            throw Error("train-base failed");
        }
        const std::string out = (abl / "out").string();
        if (cli("ablate --base " + base + " --train-data " + night_train + " --eval-data " +
                night_eval + " --out " + out + " --epochs 15 --pairs 256 --batch 16 --seed 12")) {
            throw Error("ablate failed");
        }

        nlohmann::json table = nlohmann::json::parse(read_file(fs::path(out) / "ablation.json"));
        double base_iou = -1, dcp_iou = -1, full_iou = -1, base_frac = -1;
        for (const auto& row : table.at("rows")) {
            const std::string profile = row.at("profile").get<std::string>();
            const double iou_v = row.at("mean_iou").get<double>();
            if (profile == "base") {
                base_iou = iou_v;
                base_frac = row.at("trainable_fraction").get<double>();
            }
            if (profile == "dcp") dcp_iou = iou_v;
            if (profile == "dcp+gfa_full") full_iou = iou_v;
        }
        ablation_ready = true;
        const double elapsed = seconds_since(t0);
        std::ostringstream os;
        os << "mean IoU base " << fmt(base_iou) << ", +DCP " << fmt(dcp_iou) << ", full "
           << fmt(full_iou) << " (gain " << fmt(full_iou - base_iou) << ")";
        bool pass = base_iou <= dcp_iou && base_iou < full_iou && full_iou - base_iou >= 0.02 &&
                    base_frac == 0.0 && elapsed < 1800.0;
        if (table.at("rows").size() != 4) pass = false;
        return {pass, os.str()};
    });

    // --- criterion 2: freeze invariance ---------------------------------
    run_criterion(2, "freeze invariance", [&]() -> std::pair<bool, std::string> {
        if (!ablation_ready) return {false, "ablation stage did not produce checkpoints"};
        PayloadIndex base = PayloadIndex::open(abl / "base.ckpt");
        for (const char* profile : {"dcp", "dcp+gfa_pp", "dcp+gfa_full"}) {
            PayloadIndex tuned = PayloadIndex::open(abl / "out" / (std::string(profile) + ".ckpt"));
            for (const char* tag : {"backbone", "head"}) {
                if (base.tag_bytes(tag) != tuned.tag_bytes(tag)) {
                    return {false, std::string(profile) + ": " + tag + " payload bytes changed"};
                }
            }
        }
        return {true, "backbone+head payload bytes identical across all three tuned checkpoints"};
    });

    // --- criterion 9: overfit sanity -------------------------------------
    run_criterion(9, "overfit sanity", [&]() -> std::pair<bool, std::string> {
        if (!ablation_ready) return {false, "ablation stage did not produce checkpoints"};
        Checkpoint base = load_checkpoint((abl / "base.ckpt").string());
        std::vector<Sequence> night = read_dataset((abl / "night_train").string());
        if (night.size() != 8) return {false, "expected 8 night sequences"};

        ModelConfig pcfg = base.config;
        pcfg.profile = AblationProfile::dcp_gfa_full();
        TrainConfig cfg = TrainConfig::prompt_defaults();
        cfg.epochs = 12;
        cfg.pairs_per_epoch = 192;
        cfg.batch_size = 16;
        cfg.seed = 900;
        cfg.profile = pcfg.profile;
        TrainResult tuned = prompt_tune(base.params, pcfg, night, cfg);

        const double drop = 1.0 - tuned.log.back().mean_loss / tuned.step0_loss;

        ModelParams base_eval_params;
        TrackerModel::register_params(base.config, base_eval_params, 1);
        for (auto& p : base_eval_params.all()) p.value.data() = base.params.at(p.name).value.data();
        TrackerModel base_model(base.config, std::move(base_eval_params));
        base_model.params().set_grad_enabled(false);
        tuned.model.params().set_grad_enabled(false);

        std::vector<TrackRun> base_runs, tuned_runs;
        for (const Sequence& seq : night) {
            base_runs.push_back(run_tracker(base_model, seq));
            tuned_runs.push_back(run_tracker(tuned.model, seq));
        }
        const double base_iou = compute_metrics(base_runs).mean_iou;
        const double tuned_iou = compute_metrics(tuned_runs).mean_iou;

        std::ostringstream os;
        os << "loss " << fmt(tuned.step0_loss) << " -> " << fmt(tuned.log.back().mean_loss) << " ("
           << fmt(100.0 * drop) << "% drop); train-set mean IoU " << fmt(base_iou) << " -> "
           << fmt(tuned_iou);
        return {drop >= 0.5 && tuned_iou > base_iou, os.str()};
    });

    std::printf("%s: %d criterion(s) failed (total %.1f s)\n", g_failures == 0 ? "OK" : "FAILED",
                g_failures, seconds_since(suite_start));
    return g_failures == 0 ? 0 : 1;
}
