#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nighttrack/checkpoint.hpp"
#include "nighttrack/rng.hpp"
#include "nighttrack/runner.hpp"
#include "nighttrack/train.hpp"

namespace fs = std::filesystem;
using namespace nighttrack;

namespace {

fs::path temp_path(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("nighttrack_pipe_" + name);
    fs::remove_all(p);
    return p;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::vector<Sequence> tiny_day_data(int n, int frames) {
    DatasetGenConfig gen;
    gen.sequences = n;
    gen.frames = frames;
    gen.width = 64;
    gen.height = 64;
    gen.seed = 55;
    return generate_sequences(gen);
}

}  // namespace

TEST_CASE("checkpoint round trip") {
    ModelConfig cfg = ModelConfig::tiny(AblationProfile::dcp_gfa_full());
    TrackerModel model = TrackerModel::init(cfg, 5);
    nlohmann::ordered_json meta;
    meta["note"] = "roundtrip";
    fs::path path = temp_path("ckpt.bin");
    save_checkpoint(cfg, model.params(), meta, path.string());

    Checkpoint loaded = load_checkpoint(path.string());
    CHECK(loaded.config.backbone.embed_dim == cfg.backbone.embed_dim);
    CHECK(loaded.config.profile.to_string() == "dcp+gfa_full");
    CHECK(loaded.metadata.at("note") == "roundtrip");
    REQUIRE(loaded.params.size() == model.params().size());
    for (const auto& p : model.params().all()) {
        const Param& q = loaded.params.at(p.name);
        CHECK(q.tag == p.tag);
        CHECK(q.frozen == p.frozen);
        REQUIRE(q.value.shape() == p.value.shape());
        for (size_t i = 0; i < p.value.data().size(); ++i) {
            // Values survive to f32 resolution exactly.
            CHECK(q.value.data()[i] == static_cast<double>(static_cast<float>(p.value.data()[i])));
        }
    }
}

TEST_CASE("checkpoint rejects truncation and junk") {
    ModelConfig cfg = ModelConfig::tiny();
    TrackerModel model = TrackerModel::init(cfg, 6);
    fs::path path = temp_path("trunc.bin");
    save_checkpoint(cfg, model.params(), {}, path.string());

    std::string bytes = file_bytes(path);
    {
        std::ofstream f(path, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 64));
    }
    CHECK_THROWS_AS(load_checkpoint(path.string()), CheckpointError);

    {
        std::ofstream f(path, std::ios::binary);
        f << "definitely not a checkpoint";
    }
    CHECK_THROWS_AS(load_checkpoint(path.string()), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/nowhere.bin"), CheckpointError);
}

TEST_CASE("lr schedule") {
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.lr_initial = 4e-4;
    CHECK(cfg.effective_decay_epoch() == 48);
    CHECK(cfg.lr_at_epoch(0) == 4e-4);
    CHECK(cfg.lr_at_epoch(47) == 4e-4);
    CHECK(cfg.lr_at_epoch(48) == doctest::Approx(4e-5));
    CHECK(cfg.lr_at_epoch(59) == doctest::Approx(4e-5));

    cfg.epochs = 10;
    CHECK(cfg.effective_decay_epoch() == 8);
    cfg.decay_epoch = 3;
    CHECK(cfg.lr_at_epoch(2) == 4e-4);
    CHECK(cfg.lr_at_epoch(3) == doctest::Approx(4e-5));
}

TEST_CASE("foundation training") {
    std::vector<Sequence> data = tiny_day_data(2, 10);
    ModelConfig mcfg = ModelConfig::tiny();
    TrainConfig cfg = TrainConfig::foundation_defaults();
    cfg.epochs = 5;
    cfg.pairs_per_epoch = 48;
    cfg.batch_size = 8;
    cfg.lr_initial = 2e-3;
    cfg.seed = 3;

    SUBCASE("toy run decreases the mean loss") {
        TrainResult r = train_foundation(data, mcfg, cfg);
        REQUIRE(r.log.size() == 5);
        CHECK(r.log.back().mean_loss < r.log.front().mean_loss);
    }
    SUBCASE("same seed twice gives bit-identical checkpoints") {
        TrainResult a = train_foundation(data, mcfg, cfg);
        TrainResult b = train_foundation(data, mcfg, cfg);
        fs::path pa = temp_path("det_a.bin"), pb = temp_path("det_b.bin");
        save_checkpoint(mcfg, a.model.params(), {}, pa.string());
        save_checkpoint(mcfg, b.model.params(), {}, pb.string());
        CHECK(file_bytes(pa) == file_bytes(pb));
    }
    SUBCASE("zero epochs returns the initialization") {
        TrainConfig zero = cfg;
        zero.epochs = 0;
        TrainResult r = train_foundation(data, mcfg, zero);
        TrackerModel fresh = TrackerModel::init(mcfg, zero.seed);
        for (const auto& p : fresh.params().all()) {
            CHECK(r.model.params().at(p.name).value.data() == p.value.data());
        }
    }
    SUBCASE("an absurd learning rate diverges with a located TrainingError") {
        TrainConfig wild = cfg;
        wild.epochs = 3;
        wild.lr_initial = 1e9;
        wild.clip_norm = 1e12;
        try {
            train_foundation(data, mcfg, wild);
            FAIL("expected TrainingError");
        } catch (const TrainingError& e) {
            CHECK(std::string(e.what()).find("epoch") != std::string::npos);
            CHECK(std::string(e.what()).find("step") != std::string::npos);
        }
    }
    SUBCASE("foundation stage rejects prompt profiles") {
        CHECK_THROWS_AS(train_foundation(data, ModelConfig::tiny(AblationProfile::dcp()), cfg),
                        ConfigError);
    }
    SUBCASE("epoch CSV records the decayed learning rate") {
        TrainConfig sched = cfg;
        sched.epochs = 5;
        sched.decay_epoch = 4;
        TrainResult r = train_foundation(data, mcfg, sched);
        fs::path csv = temp_path("log.csv");
        write_epoch_csv(r.log, csv.string());
        std::string text = file_bytes(csv);
        CHECK(text.find("epoch,mean_loss,lr") != std::string::npos);
        CHECK(text.find("0.002") != std::string::npos);    // initial lr
        CHECK(text.find("0.0002") != std::string::npos);   // decayed lr
        CHECK(r.log[3].lr == doctest::Approx(2e-3));
        CHECK(r.log[4].lr == doctest::Approx(2e-4));
    }
}

TEST_CASE("prompt tuning") {
    std::vector<Sequence> day = tiny_day_data(2, 10);
    ModelConfig base_cfg = ModelConfig::tiny();
    TrainConfig fcfg = TrainConfig::foundation_defaults();
    fcfg.epochs = 2;
    fcfg.pairs_per_epoch = 16;
    fcfg.batch_size = 8;
    fcfg.seed = 4;
    TrainResult base = train_foundation(day, base_cfg, fcfg);

    DatasetGenConfig ngen;
    ngen.sequences = 2;
    ngen.frames = 10;
    ngen.width = 64;
    ngen.height = 64;
    ngen.seed = 66;
    ngen.night = true;
    std::vector<Sequence> night = generate_sequences(ngen);

    ModelConfig pcfg = ModelConfig::tiny(AblationProfile::dcp_gfa_full());
    TrainConfig tcfg = TrainConfig::prompt_defaults();
    tcfg.epochs = 2;
    tcfg.pairs_per_epoch = 16;
    tcfg.batch_size = 8;
    tcfg.seed = 9;
    tcfg.profile = pcfg.profile;

    SUBCASE("zero tuning steps reproduce the base model output") {
        TrainConfig zero = tcfg;
        zero.epochs = 0;
        TrainResult tuned = prompt_tune(base.model.params(), pcfg, night, zero);
        Rng rng(12);
        std::vector<double> img_t(static_cast<size_t>(3 * 16 * 16));
        std::vector<double> img_s(static_cast<size_t>(3 * 32 * 32));
        for (double& v : img_t) v = rng.uniform();
        for (double& v : img_s) v = rng.uniform();
        Tensor tt = Tensor::from_data({3, 16, 16}, img_t);
        Tensor ts = Tensor::from_data({3, 32, 32}, img_s);
        CHECK(tuned.model.forward_box(tt, ts).data() == base.model.forward_box(tt, ts).data());
    }
    SUBCASE("frozen backbone and head bytes survive tuning") {
        TrainResult tuned = prompt_tune(base.model.params(), pcfg, night, tcfg);
        for (const auto& p : tuned.model.params().all()) {
            if (p.tag == ParamTag::backbone || p.tag == ParamTag::head) {
                CHECK(p.value.data() == base.model.params().at(p.name).value.data());
                CHECK(p.frozen);
            } else {
                CHECK_FALSE(p.frozen);
            }
        }
    }
    SUBCASE("base profile is rejected") {
        CHECK_THROWS_AS(prompt_tune(base.model.params(), ModelConfig::tiny(), night, tcfg),
                        ConfigError);
    }
    SUBCASE("training on empty data is a DataError") {
        CHECK_THROWS_AS(prompt_tune(base.model.params(), pcfg, {}, tcfg), DataError);
    }
}

TEST_CASE("overfit on a static object reaches IoU 0.5 everywhere") {
    // Single static-object sequence; a model trained on it must track it.
    DatasetGenConfig gen;
    gen.sequences = 1;
    gen.frames = 10;
    gen.width = 64;
    gen.height = 64;
    gen.seed = 70;
    std::vector<Sequence> data = generate_sequences(gen);
    SceneConfig static_cfg;
    static_cfg.frame_width = 64;
    static_cfg.frame_height = 64;
    static_cfg.frame_count = 10;
    static_cfg.motion_sigma = 0.0;
    static_cfg.object_width = 16;
    static_cfg.object_height = 14;
    static_cfg.rng_seed = 71;
    Sequence still = synth_scene(static_cfg);
    still.name = "still";
    data = {still};

    ModelConfig mcfg = ModelConfig::tiny();
    TrainConfig cfg = TrainConfig::foundation_defaults();
    cfg.epochs = 30;
    cfg.pairs_per_epoch = 64;
    cfg.batch_size = 8;
    cfg.lr_initial = 2e-3;
    cfg.seed = 8;
    TrainResult r = train_foundation(data, mcfg, cfg);
    r.model.params().set_grad_enabled(false);
    TrackRun run = run_tracker(r.model, still);
    for (size_t i = 1; i < run.iou_series.size(); ++i) {
        CHECK(run.iou_series[i] >= 0.5);
    }
}
