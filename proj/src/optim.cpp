#include "nighttrack/optim.hpp"

#include <cmath>

namespace nighttrack {

void adamw_step(ModelParams& params, const GradMap& grads, AdamWState& state) {
    for (const auto& [name, g] : grads) {
        if (!params.has(name)) throw ContractError("adamw_step: gradient for unknown parameter " + name);
        const Param& p = params.at(name);
        if (p.frozen) throw FreezeViolation("adamw_step: gradient supplied for frozen parameter " + name);
        if (g.size() != p.value.data().size()) {
            throw ShapeError("adamw_step: gradient size mismatch for " + name);
        }
    }
    for (const auto& p : params.all()) {
        if (!p.frozen && !grads.count(p.name)) {
            throw ContractError("adamw_step: missing gradient for trainable parameter " + p.name);
        }
    }

    state.t += 1;
    const AdamWConfig& c = state.cfg;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));

    for (auto& p : params.all()) {
        if (p.frozen) continue;
        const std::vector<double>& g = grads.at(p.name);
        std::vector<double>& m = state.m[p.name];
        std::vector<double>& v = state.v[p.name];
        if (m.empty()) m.assign(g.size(), 0.0);
        if (v.empty()) v.assign(g.size(), 0.0);
        std::vector<double>& w = p.value.data();
        for (size_t i = 0; i < w.size(); ++i) {
            w[i] -= c.lr * c.weight_decay * w[i];
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
    }
}

double clip_grad_norm(GradMap& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& [name, g] : grads) {
        (void)name;
        for (double v : g) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& [name, g] : grads) {
            (void)name;
            for (double& v : g) v *= s;
        }
    }
    return norm;
}

}  // namespace nighttrack
