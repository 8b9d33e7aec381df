#include "nighttrack/train.hpp"

#include <cmath>
#include <fstream>

#include "nighttrack/objective.hpp"
#include "nighttrack/ops.hpp"
#include "nighttrack/optim.hpp"
#include "nighttrack/rng.hpp"

namespace nighttrack {

TrainConfig TrainConfig::foundation_defaults() {
    TrainConfig c;
    c.stage = TrainStage::foundation;
    c.epochs = 20;
    c.pairs_per_epoch = 512;
    c.batch_size = 16;
    return c;
}

TrainConfig TrainConfig::prompt_defaults() {
    TrainConfig c;
    c.stage = TrainStage::prompt;
    c.epochs = 60;
    c.pairs_per_epoch = 256;
    c.batch_size = 16;
    c.profile = AblationProfile::dcp_gfa_full();
    return c;
}

void write_epoch_csv(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("write_epoch_csv: cannot open " + path);
    f << "epoch,mean_loss,lr\n";
    char buf[96];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", e.epoch, e.mean_loss, e.lr);
        f << buf;
    }
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["stage"] = cfg.stage == TrainStage::foundation ? "foundation" : "prompt";
    j["epochs"] = cfg.epochs;
    j["pairs_per_epoch"] = cfg.pairs_per_epoch;
    j["batch_size"] = cfg.batch_size;
    j["lr_initial"] = cfg.lr_initial;
    j["lr_decay_factor"] = cfg.lr_decay_factor;
    j["decay_epoch"] = cfg.effective_decay_epoch();
    j["lambda_l1"] = cfg.lambda_l1;
    j["lambda_giou"] = cfg.lambda_giou;
    j["weight_decay"] = cfg.weight_decay;
    j["clip_norm"] = cfg.clip_norm;
    j["seed"] = cfg.seed;
    j["profile"] = cfg.profile.to_string();
    return j;
}

SamplingConfig sampling_for(const BackboneConfig& bb) {
    SamplingConfig s;
    s.template_size = bb.template_size;
    s.search_size = bb.search_size;
    return s;
}

namespace {

Tensor gt_tensor(const Box& norm_box) {
    return Tensor::from_data({4}, {norm_box.x1, norm_box.y1, norm_box.x2, norm_box.y2});
}

struct StepOutcome {
    double loss = 0.0;
};

StepOutcome train_step(TrackerModel& model, const std::vector<Sequence>& data,
                       const TrainConfig& cfg, const SamplingConfig& scfg, Rng& rng,
                       AdamWState& opt, bool apply_update, int epoch, int step) {
    ModelParams& params = model.params();
    params.zero_grad();

    Tensor batch_loss;
    try {
        for (int b = 0; b < cfg.batch_size; ++b) {
            const size_t seq_idx = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(data.size())));
            const Sequence& seq = data[seq_idx];
            const int64_t frames = static_cast<int64_t>(seq.frames.size());
            const size_t tf = static_cast<size_t>(rng.uniform_int(frames));
            const size_t sf = static_cast<size_t>(rng.uniform_int(frames));
            PairSample pair = sample_pair(seq, tf, sf, scfg, &rng);

            Tensor pred = model.forward_box(pair.template_crop, pair.search_crop);
            LossBreakdown lb = tracking_loss(pred, gt_tensor(pair.gt_in_search), cfg.lambda_l1,
                                             cfg.lambda_giou);
            batch_loss = b == 0 ? lb.total : add(batch_loss, lb.total);
        }
    } catch (const NumericsError& e) {
        // Exploding parameters surface as non-finite intermediates.
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step) + ": " + e.what());
    }
    batch_loss = mul_const(batch_loss, 1.0 / cfg.batch_size);

    const double loss_value = batch_loss.value();
    if (!std::isfinite(loss_value)) {
        throw TrainingError("training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(step));
    }
    if (apply_update) {
        backward(batch_loss);
        GradMap grads = params.collect_grads();
        clip_grad_norm(grads, cfg.clip_norm);
        adamw_step(params, grads, opt);
    }
    return StepOutcome{loss_value};
}

TrainResult run_training(TrackerModel model, const std::vector<Sequence>& data,
                         const TrainConfig& cfg) {
    if (data.empty()) throw DataError("training: dataset is empty");
    const SamplingConfig scfg = sampling_for(model.config().backbone);
    Rng rng(cfg.seed);
    AdamWState opt;
    opt.cfg.weight_decay = cfg.weight_decay;

    TrainResult result{std::move(model), {}, 0.0};
    const int steps_per_epoch = std::max(1, cfg.pairs_per_epoch / cfg.batch_size);

    // Loss of the initial parameters on the first batch, recorded before any
    // update so improvement is measurable against the true starting point.
    {
        Rng probe = rng.fork(0x70726f6265ull);
        AdamWState dummy;
        result.step0_loss =
            train_step(result.model, data, cfg, scfg, probe, dummy, false, 0, 0).loss;
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.cfg.lr = cfg.lr_at_epoch(epoch);
        double loss_sum = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            loss_sum +=
                train_step(result.model, data, cfg, scfg, rng, opt, true, epoch, step).loss;
        }
        result.log.push_back(EpochLog{epoch, loss_sum / steps_per_epoch, opt.cfg.lr});
    }
    return result;
}

}  // namespace

TrainResult train_foundation(const std::vector<Sequence>& day_data, const ModelConfig& model_cfg,
                             const TrainConfig& cfg) {
    if (model_cfg.profile.enable_dcp) {
        throw ConfigError("train_foundation: foundation stage uses the base profile");
    }
    TrackerModel model = TrackerModel::init(model_cfg, cfg.seed);
    return run_training(std::move(model), day_data, cfg);
}

TrainResult prompt_tune(const ModelParams& base_params, const ModelConfig& model_cfg,
                        const std::vector<Sequence>& night_data, const TrainConfig& cfg) {
    if (!model_cfg.profile.enable_dcp) {
        throw ConfigError("prompt_tune: profile 'base' has no trainable prompt parameters");
    }
    TrackerModel model = TrackerModel::from_base(model_cfg, base_params);
    TrainResult result = run_training(std::move(model), night_data, cfg);

    // Freeze invariance is a hard postcondition, checked value-for-value.
    for (const auto& p : result.model.params().all()) {
        if (p.tag != ParamTag::backbone && p.tag != ParamTag::head) continue;
        const Param& src = base_params.at(p.name);
        if (p.value.data() != src.value.data()) {
            throw FreezeViolation("prompt_tune: frozen parameter " + p.name + " changed");
        }
    }
    return result;
}

}  // namespace nighttrack
