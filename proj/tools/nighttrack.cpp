// nighttrack: synthetic day/night tracking workbench.
//
// Subcommands: gen-data, train-base, prompt-tune, track, eval, gradcheck,
// ablate. Every command is deterministic given its flags and writes a run
// manifest "<output>.run.json" next to its primary output.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "nighttrack/checkpoint.hpp"
#include "nighttrack/dataset.hpp"
#include "nighttrack/gradcheck.hpp"
#include "nighttrack/metrics.hpp"
#include "nighttrack/model.hpp"
#include "nighttrack/objective.hpp"
#include "nighttrack/runner.hpp"
#include "nighttrack/sampling.hpp"
#include "nighttrack/synth.hpp"
#include "nighttrack/train.hpp"
#include "nighttrack/verify.hpp"

namespace fs = std::filesystem;
using namespace nighttrack;
using nlohmann::ordered_json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

using Clock = std::chrono::steady_clock;

struct ManifestWriter {
    std::string command;
    ordered_json config = ordered_json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    Clock::time_point started = Clock::now();

    void write(const std::string& primary_output) const {
        ordered_json j;
        j["command"] = command;
        j["config"] = config;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["tool_version"] = kToolVersion;
        j["duration_seconds"] = std::chrono::duration<double>(Clock::now() - started).count();
        std::ofstream f(primary_output + ".run.json");
        f << j.dump(2) << "\n";
    }
};

// Flat-JSON config file support: file values fill in flags the user did not
// pass on the command line (flags win, defaults lose).
void apply_config_file(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config file: ") + e.what());
    }
    for (auto& [key, value] : j.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt || opt->count() > 0) continue;
        std::string text = value.is_string() ? value.get<std::string>() : value.dump();
        opt->add_result(text);
        opt->run_callback();
    }
}

ModelConfig model_config_from(const std::string& preset, int reduction, AblationProfile profile) {
    ModelConfig cfg;
    if (preset == "tiny") cfg = ModelConfig::tiny(profile);
    else if (preset == "small") cfg = ModelConfig::small(profile);
    else if (preset == "desk") cfg = ModelConfig::desk(profile);
    else throw ConfigError("unknown model preset '" + preset + "' (tiny, small, desk)");
    if (reduction > 0) cfg.dcp_reduction = reduction;
    return cfg;
}

void require_empty_or_force(const std::string& dir, bool force) {
    if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
        throw ConfigError("output directory " + dir + " is not empty (use --force to overwrite)");
    }
}

// Runs fn(i) for i in [0, n) on `workers` threads; results must be written
// into per-index slots so the outcome is identical for any worker count.
void parallel_for(int64_t n, int workers, const std::function<void(int64_t)>& fn) {
    workers = std::max(1, workers);
    if (workers == 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int64_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct TrainFlags {
    std::string model = "desk";
    int reduction = 0;
    int epochs = -1;
    int pairs = -1;
    int batch = -1;
    double lr = -1.0;
    int decay_epoch = -1;
    double weight_decay = -1.0;
    uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--model", f.model, "model preset: tiny, small, desk")->default_str("desk");
    cmd->add_option("--reduction", f.reduction, "override DCP reduction ratio");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--pairs", f.pairs, "sampled pairs per epoch");
    cmd->add_option("--batch", f.batch, "batch size");
    cmd->add_option("--lr", f.lr, "initial learning rate");
    cmd->add_option("--decay-epoch", f.decay_epoch, "epoch at which lr is divided by 10 (default 80%)");
    cmd->add_option("--weight-decay", f.weight_decay, "AdamW weight decay");
    cmd->add_option("--seed", f.seed, "training seed");
}

TrainConfig train_config_from(const TrainFlags& f, TrainConfig base) {
    if (f.epochs >= 0) base.epochs = f.epochs;
    if (f.pairs > 0) base.pairs_per_epoch = f.pairs;
    if (f.batch > 0) base.batch_size = f.batch;
    if (f.lr > 0) base.lr_initial = f.lr;
    if (f.decay_epoch >= 0) base.decay_epoch = f.decay_epoch;
    if (f.weight_decay >= 0) base.weight_decay = f.weight_decay;
    base.seed = f.seed;
    return base;
}

ordered_json counts_json(const ModelParams& params) {
    auto counts = params.count([](const Param& p) {
        return p.tag == ParamTag::dcp || p.tag == ParamTag::gfa;
    });
    ordered_json j;
    j["total"] = counts.total;
    j["prompt"] = counts.selected;
    j["prompt_fraction"] = counts.fraction();
    for (const auto& [tag, n] : counts.by_tag) j["by_tag"][tag] = n;
    return j;
}

void print_fraction_report(const ModelParams& params) {
    auto counts = params.count([](const Param& p) {
        return p.tag == ParamTag::dcp || p.tag == ParamTag::gfa;
    });
    std::printf("parameters: total=%lld prompt=%lld (%.2f%%)\n",
                static_cast<long long>(counts.total), static_cast<long long>(counts.selected),
                100.0 * counts.fraction());
    std::printf("full-scale reference: 3.03M prompt of 89.96M total (3.3%%)\n");
}

int cmd_gen_data(const std::string& out, int seqs, int frames, int width, int height,
                 uint64_t seed, bool night, bool force, ManifestWriter& mw) {
    require_empty_or_force(out, force);
    DatasetGenConfig cfg{seqs, frames, width, height, seed, night};
    std::vector<Sequence> sequences = generate_sequences(cfg);
    write_dataset(sequences, out);
    mw.outputs.push_back(out);
    mw.write(out);
    std::printf("wrote %d sequences (%d frames each) to %s\n", seqs, frames, out.c_str());
    return 0;
}

int cmd_train_base(const std::string& data_dir, const std::string& out, const TrainFlags& tf,
                   ManifestWriter& mw) {
    const ModelConfig mcfg = model_config_from(tf.model, tf.reduction, AblationProfile::base());
    TrainConfig cfg = train_config_from(tf, TrainConfig::foundation_defaults());
    std::vector<Sequence> data = read_dataset(data_dir);
    TrainResult result = train_foundation(data, mcfg, cfg);

    ordered_json meta;
    meta["train_config"] = train_config_to_json(cfg);
    meta["params"] = counts_json(result.model.params());
    meta["step0_loss"] = result.step0_loss;
    if (!result.log.empty()) meta["final_mean_loss"] = result.log.back().mean_loss;
    save_checkpoint(mcfg, result.model.params(), meta, out);
    write_epoch_csv(result.log, out + ".log.csv");

    mw.inputs.push_back(data_dir);
    mw.outputs.push_back(out);
    mw.outputs.push_back(out + ".log.csv");
    mw.config["train_config"] = train_config_to_json(cfg);
    mw.write(out);
    std::printf("foundation checkpoint: %s (first epoch loss %.4f, last %.4f)\n", out.c_str(),
                result.log.empty() ? 0.0 : result.log.front().mean_loss,
                result.log.empty() ? 0.0 : result.log.back().mean_loss);
    return 0;
}

int cmd_prompt_tune(const std::string& base_path, const std::string& data_dir,
                    const std::string& out, const std::string& profile_name, const TrainFlags& tf,
                    ManifestWriter& mw) {
    const AblationProfile profile = AblationProfile::from_string(profile_name);
    if (!profile.enable_dcp) {
        throw ConfigError("prompt-tune: profile 'base' has no trainable prompt parameters");
    }
    Checkpoint base = load_checkpoint(base_path);
    ModelConfig mcfg = base.config;
    mcfg.profile = profile;
    if (tf.reduction > 0) mcfg.dcp_reduction = tf.reduction;

    TrainConfig cfg = train_config_from(tf, TrainConfig::prompt_defaults());
    cfg.profile = profile;
    std::vector<Sequence> data = read_dataset(data_dir);
    TrainResult result = prompt_tune(base.params, mcfg, data, cfg);

    ordered_json meta;
    meta["train_config"] = train_config_to_json(cfg);
    meta["params"] = counts_json(result.model.params());
    meta["base_checkpoint"] = base_path;
    meta["step0_loss"] = result.step0_loss;
    if (!result.log.empty()) meta["final_mean_loss"] = result.log.back().mean_loss;
    save_checkpoint(mcfg, result.model.params(), meta, out);
    write_epoch_csv(result.log, out + ".log.csv");

    mw.inputs = {base_path, data_dir};
    mw.outputs = {out, out + ".log.csv"};
    mw.config["train_config"] = train_config_to_json(cfg);
    mw.write(out);
    print_fraction_report(result.model.params());
    std::printf("tuned checkpoint: %s (step0 loss %.4f, last %.4f)\n", out.c_str(),
                result.step0_loss, result.log.empty() ? 0.0 : result.log.back().mean_loss);
    return 0;
}

int cmd_track(const std::string& ckpt_path, const std::string& data_dir, const std::string& out,
              int workers, ManifestWriter& mw) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    TrackerModel model(ckpt.config, std::move(ckpt.params));
    model.params().set_grad_enabled(false);
    std::vector<Sequence> data = read_dataset(data_dir);
    fs::create_directories(out);

    std::vector<TrackRun> runs(data.size());
    parallel_for(static_cast<int64_t>(data.size()), workers, [&](int64_t i) {
        runs[static_cast<size_t>(i)] = run_tracker(model, data[static_cast<size_t>(i)]);
    });
    for (const TrackRun& run : runs) {
        write_boxes(run, (fs::path(out) / (run.sequence + ".txt")).string());
    }
    mw.inputs = {ckpt_path, data_dir};
    mw.outputs = {out};
    mw.write(out);
    std::printf("tracked %zu sequences into %s\n", data.size(), out.c_str());
    return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& boxes_dir, const std::string& report,
             int workers, ManifestWriter& mw) {
    std::vector<Sequence> data = read_dataset(data_dir);
    std::vector<TrackRun> runs(data.size());
    parallel_for(static_cast<int64_t>(data.size()), workers, [&](int64_t i) {
        const Sequence& seq = data[static_cast<size_t>(i)];
        TrackRun run;
        run.sequence = seq.name;
        run.attributes = seq.attributes;
        run.groundtruth = seq.groundtruth;
        run.predictions = read_boxes((fs::path(boxes_dir) / (seq.name + ".txt")).string());
        if (run.predictions.size() != run.groundtruth.size()) {
            throw EvalError("sequence '" + seq.name + "': prediction count " +
                            std::to_string(run.predictions.size()) + " does not match " +
                            std::to_string(run.groundtruth.size()) + " frames");
        }
        fill_series(run);
        runs[static_cast<size_t>(i)] = std::move(run);
    });

    MetricsReport overall = compute_metrics(runs);
    auto by_attribute = attribute_report(runs);
    {
        std::ofstream f(report);
        if (!f) throw DataError("eval: cannot open report " + report);
        f << report_to_json(overall, by_attribute, runs).dump(2) << "\n";
    }
    write_curve_csvs(overall, report);
    mw.inputs = {data_dir, boxes_dir};
    mw.outputs = {report};
    mw.write(report);
    std::printf("success %.4f | precision %.4f | norm precision %.4f | mean IoU %.4f (%lld frames)\n",
                overall.success_score, overall.precision_score, overall.norm_precision_score,
                overall.mean_iou, static_cast<long long>(overall.frames_scored));
    return 0;
}

int cmd_gradcheck(uint64_t seed, double eps, double tol, ManifestWriter& mw) {
    const auto started = Clock::now();
    TrackingGradcheck result = run_tracking_gradcheck(seed, eps);
    const double elapsed = std::chrono::duration<double>(Clock::now() - started).count();

    std::printf("evaluation box: (%.4f, %.4f, %.4f, %.4f)\n", result.box[0], result.box[1],
                result.box[2], result.box[3]);
    std::printf("%-18s %12s %8s\n", "class", "max rel err", "coords");
    for (const auto& [cls, stat] : result.report.by_class) {
        std::printf("%-18s %12.3e %8lld\n", cls.c_str(), stat.max_rel_error,
                    static_cast<long long>(stat.coords));
    }
    std::printf("checked %lld coordinates, skipped %lld frozen; max rel err %.3e (tol %.1e); %.1f s\n",
                static_cast<long long>(result.report.coords_checked),
                static_cast<long long>(result.report.coords_skipped_frozen),
                result.report.max_rel_error, tol, elapsed);
    const bool pass = result.report.passes(tol);
    std::printf("%s\n", pass ? "PASS" : "FAIL");
    mw.config["max_rel_error"] = result.report.max_rel_error;
    mw.write("gradcheck");
    return pass ? 0 : 1;
}

int cmd_ablate(const std::string& base_path, const std::string& train_dir,
               const std::string& eval_dir, const std::string& out, const TrainFlags& tf,
               int workers, ManifestWriter& mw) {
    Checkpoint base = load_checkpoint(base_path);
    std::vector<Sequence> train_data = read_dataset(train_dir);
    std::vector<Sequence> eval_data = read_dataset(eval_dir);
    fs::create_directories(out);

    auto eval_model = [&](const TrackerModel& model) {
        std::vector<TrackRun> runs(eval_data.size());
        parallel_for(static_cast<int64_t>(eval_data.size()), workers, [&](int64_t i) {
            runs[static_cast<size_t>(i)] = run_tracker(model, eval_data[static_cast<size_t>(i)]);
        });
        return compute_metrics(runs);
    };

    ordered_json table = ordered_json::array();
    std::printf("%-14s %10s %10s %10s %10s\n", "profile", "success", "precision", "mean_iou",
                "prompt%");
    for (const std::string profile_name : {"base", "dcp", "dcp+gfa_pp", "dcp+gfa_full"}) {
        const AblationProfile profile = AblationProfile::from_string(profile_name);
        ModelConfig mcfg = base.config;
        mcfg.profile = profile;
        if (tf.reduction > 0) mcfg.dcp_reduction = tf.reduction;

        MetricsReport metrics;
        double fraction = 0.0;
        if (!profile.enable_dcp) {
            ModelParams fresh;
            TrackerModel::register_params(mcfg, fresh, 1);
            for (auto& p : fresh.all()) p.value.data() = base.params.at(p.name).value.data();
            TrackerModel model(mcfg, std::move(fresh));
            model.params().set_grad_enabled(false);
            metrics = eval_model(model);
        } else {
            TrainConfig cfg = train_config_from(tf, TrainConfig::prompt_defaults());
            cfg.profile = profile;
            TrainResult result = prompt_tune(base.params, mcfg, train_data, cfg);
            auto counts = result.model.params().count([](const Param& p) {
                return p.tag == ParamTag::dcp || p.tag == ParamTag::gfa;
            });
            fraction = counts.fraction();
            ordered_json meta;
            meta["train_config"] = train_config_to_json(cfg);
            meta["params"] = counts_json(result.model.params());
            const std::string ckpt_path = (fs::path(out) / (profile_name + ".ckpt")).string();
            save_checkpoint(mcfg, result.model.params(), meta, ckpt_path);
            write_epoch_csv(result.log, ckpt_path + ".log.csv");
            result.model.params().set_grad_enabled(false);
            metrics = eval_model(result.model);
        }

        std::printf("%-14s %10.4f %10.4f %10.4f %9.2f%%\n", profile_name.c_str(),
                    metrics.success_score, metrics.precision_score, metrics.mean_iou,
                    100.0 * fraction);
        ordered_json row;
        row["profile"] = profile_name;
        row["success"] = metrics.success_score;
        row["precision"] = metrics.precision_score;
        row["norm_precision"] = metrics.norm_precision_score;
        row["mean_iou"] = metrics.mean_iou;
        row["trainable_fraction"] = fraction;
        table.push_back(row);
    }
    std::printf("full-scale reference: 3.03M prompt of 89.96M total (3.3%%)\n");

    ordered_json summary;
    summary["rows"] = table;
    const std::string table_path = (fs::path(out) / "ablation.json").string();
    {
        std::ofstream f(table_path);
        f << summary.dump(2) << "\n";
    }
    mw.inputs = {base_path, train_dir, eval_dir};
    mw.outputs = {out};
    mw.write(table_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic day/night prompt-tuned tracking workbench"};
    app.require_subcommand(1);
    std::string config_file;
    app.add_option("--config", config_file, "flat JSON config file (flags override)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    std::string gen_out;
    int gen_seqs = 8, gen_frames = 60, gen_width = 96, gen_height = 96;
    uint64_t gen_seed = 0;
    bool gen_night = false, gen_force = false;
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen->add_option("--seqs", gen_seqs, "number of sequences");
    gen->add_option("--frames", gen_frames, "frames per sequence");
    gen->add_option("--width", gen_width, "frame width");
    gen->add_option("--height", gen_height, "frame height");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_flag("--night", gen_night, "darken frames with seed-derived parameters");
    gen->add_flag("--force", gen_force, "allow writing into a non-empty directory");

    // train-base
    auto* train = app.add_subcommand("train-base", "train the daytime foundation tracker");
    std::string train_data, train_out;
    TrainFlags train_flags;
    train->add_option("--data", train_data, "daytime dataset directory")->required();
    train->add_option("--out", train_out, "output checkpoint path")->required();
    add_train_flags(train, train_flags);

    // prompt-tune
    auto* tune = app.add_subcommand("prompt-tune", "tune prompt parameters on nighttime data");
    std::string tune_base, tune_data, tune_out, tune_profile = "dcp+gfa_full";
    TrainFlags tune_flags;
    tune->add_option("--base", tune_base, "foundation checkpoint")->required();
    tune->add_option("--data", tune_data, "nighttime dataset directory")->required();
    tune->add_option("--out", tune_out, "output checkpoint path")->required();
    tune->add_option("--profile", tune_profile, "base, dcp, dcp+gfa_pp, dcp+gfa_full");
    add_train_flags(tune, tune_flags);

    // track
    auto* track = app.add_subcommand("track", "run one-pass tracking over a dataset");
    std::string track_ckpt, track_data, track_out;
    int track_workers = 1;
    track->add_option("--ckpt", track_ckpt, "checkpoint path")->required();
    track->add_option("--data", track_data, "dataset directory")->required();
    track->add_option("--out", track_out, "output directory for box files")->required();
    track->add_option("--workers", track_workers, "per-sequence parallelism");

    // eval
    auto* eval = app.add_subcommand("eval", "score predicted boxes against groundtruth");
    std::string eval_data, eval_boxes, eval_report;
    int eval_workers = 1;
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--boxes", eval_boxes, "directory of predicted box files")->required();
    eval->add_option("--report", eval_report, "output report JSON path")->required();
    eval->add_option("--workers", eval_workers, "per-sequence parallelism");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of prompt gradients");
    uint64_t gc_seed = 5;
    double gc_eps = 1e-4, gc_tol = 1e-4;
    gc->add_option("--seed", gc_seed, "seed for parameters and the synthetic pair");
    gc->add_option("--eps", gc_eps, "central-difference step");
    gc->add_option("--tol", gc_tol, "max relative error tolerance");

    // ablate
    auto* ab = app.add_subcommand("ablate", "train and score all four profiles");
    std::string ab_base, ab_train, ab_eval, ab_out;
    TrainFlags ab_flags;
    int ab_workers = 1;
    ab->add_option("--base", ab_base, "foundation checkpoint")->required();
    ab->add_option("--train-data", ab_train, "nighttime tuning dataset")->required();
    ab->add_option("--eval-data", ab_eval, "nighttime evaluation dataset")->required();
    ab->add_option("--out", ab_out, "output directory")->required();
    ab->add_option("--workers", ab_workers, "per-sequence parallelism");
    add_train_flags(ab, ab_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            return app.exit(e);
        }
        app.exit(e);
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        apply_config_file(sub, config_file);

        ManifestWriter mw;
        mw.command = sub->get_name();
        for (const CLI::Option* opt : sub->get_options()) {
            const auto& names = opt->get_lnames();
            if (opt->count() > 0 && !names.empty()) {
                mw.config[names.front()] = opt->results().front();
            }
        }

        if (sub == gen) {
            mw.config = {{"out", gen_out},       {"seqs", gen_seqs},   {"frames", gen_frames},
                         {"width", gen_width},   {"height", gen_height}, {"seed", gen_seed},
                         {"night", gen_night},   {"force", gen_force}};
            return cmd_gen_data(gen_out, gen_seqs, gen_frames, gen_width, gen_height, gen_seed,
                                gen_night, gen_force, mw);
        }
        if (sub == train) return cmd_train_base(train_data, train_out, train_flags, mw);
        if (sub == tune) {
            return cmd_prompt_tune(tune_base, tune_data, tune_out, tune_profile, tune_flags, mw);
        }
        if (sub == track) return cmd_track(track_ckpt, track_data, track_out, track_workers, mw);
        if (sub == eval) return cmd_eval(eval_data, eval_boxes, eval_report, eval_workers, mw);
        if (sub == gc) return cmd_gradcheck(gc_seed, gc_eps, gc_tol, mw);
        if (sub == ab) return cmd_ablate(ab_base, ab_train, ab_eval, ab_out, ab_flags, ab_workers, mw);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
