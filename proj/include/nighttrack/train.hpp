#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nighttrack/checkpoint.hpp"
#include "nighttrack/model.hpp"
#include "nighttrack/sampling.hpp"
#include "nighttrack/synth.hpp"

namespace nighttrack {

enum class TrainStage { foundation, prompt };

struct TrainConfig {
    TrainStage stage = TrainStage::foundation;
    int epochs = 20;
    int pairs_per_epoch = 512;
    int batch_size = 16;
    double lr_initial = 4e-4;
    double lr_decay_factor = 0.1;
    int decay_epoch = -1;  // -1: decay at 80% of the epochs
    double lambda_l1 = 5.0;
    double lambda_giou = 2.0;
    double weight_decay = 1e-4;
    double clip_norm = 1.0;
    uint64_t seed = 0;
    AblationProfile profile;  // prompt stage only

    int effective_decay_epoch() const {
        if (decay_epoch >= 0) return decay_epoch;
        return static_cast<int>(std::llround(0.8 * epochs));
    }
    // Step schedule: initial lr before the decay epoch, divided after.
    double lr_at_epoch(int epoch) const {
        return epoch < effective_decay_epoch() ? lr_initial : lr_initial * lr_decay_factor;
    }

    static TrainConfig foundation_defaults();  // 20 epochs x 512 pairs, batch 16
    static TrainConfig prompt_defaults();      // 60 epochs x 256 pairs, batch 16, decay at 48
};

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    TrackerModel model;
    std::vector<EpochLog> log;
    double step0_loss = 0.0;  // batch loss before any update
};

// Writes "epoch,mean_loss,lr" rows.
void write_epoch_csv(const std::vector<EpochLog>& log, const std::string& path);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);

// Stage 1: all parameters trainable, random init from cfg.seed.
TrainResult train_foundation(const std::vector<Sequence>& day_data, const ModelConfig& model_cfg,
                             const TrainConfig& cfg);

// Stage 2: backbone+head copied from the base params and frozen; only
// dcp/gfa parameters receive updates. Any gradient reaching a frozen
// parameter aborts with FreezeViolation.
TrainResult prompt_tune(const ModelParams& base_params, const ModelConfig& model_cfg,
                        const std::vector<Sequence>& night_data, const TrainConfig& cfg);

// Sampling configuration matching a backbone's crop sizes.
SamplingConfig sampling_for(const BackboneConfig& bb);

}  // namespace nighttrack
