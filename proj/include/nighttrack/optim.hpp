#pragma once

#include <map>
#include <string>
#include <vector>

#include "nighttrack/params.hpp"

namespace nighttrack {

struct AdamWConfig {
    double lr = 4e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

// Per-parameter moments plus a shared step counter. t increases by exactly
// one per step.
struct AdamWState {
    AdamWConfig cfg;
    int64_t t = 0;
    std::map<std::string, std::vector<double>> m;
    std::map<std::string, std::vector<double>> v;
};

// One decoupled-weight-decay Adam step. `grads` must cover exactly the
// trainable parameters: a gradient for a frozen parameter is a
// FreezeViolation, a missing gradient for a trainable one a ContractError.
// Decay is applied to the parameter before the moment-update term.
void adamw_step(ModelParams& params, const GradMap& grads, AdamWState& state);

// Global-norm gradient clipping, in place. Returns the pre-clip norm.
double clip_grad_norm(GradMap& grads, double max_norm);

}  // namespace nighttrack
