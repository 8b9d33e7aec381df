#include "nighttrack/prompt.hpp"

#include <cmath>

#include "nighttrack/ops.hpp"

namespace nighttrack {

void AblationProfile::validate() const {
    if ((enable_gfa_pp || enable_gfa_pb) && !enable_dcp) {
        throw ConfigError("ablation profile: gated aggregation requires the prompter");
    }
}

AblationProfile AblationProfile::from_string(const std::string& name) {
    if (name == "base") return base();
    if (name == "dcp") return dcp();
    if (name == "dcp+gfa_pp") return dcp_gfa_pp();
    if (name == "dcp+gfa_full") return dcp_gfa_full();
    throw ConfigError("unknown profile '" + name + "' (expected base, dcp, dcp+gfa_pp, dcp+gfa_full)");
}

std::string AblationProfile::to_string() const {
    if (!enable_dcp) return "base";
    if (enable_gfa_pp && enable_gfa_pb) return "dcp+gfa_full";
    if (enable_gfa_pp) return "dcp+gfa_pp";
    return "dcp";
}

Tensor tokens_to_spatial(const Tensor& tokens_part) {
    if (tokens_part.shape().size() != 2) throw ShapeError("tokens_to_spatial: expected {M,D}");
    const int64_t m = tokens_part.dim(0), d = tokens_part.dim(1);
    const int64_t s = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(m))));
    if (s * s != m) {
        throw ShapeError("tokens_to_spatial: token count " + std::to_string(m) +
                         " is not a perfect square");
    }
    return reshape(transpose(tokens_part), {d, s, s});
}

Tensor spatial_to_tokens(const Tensor& grid) {
    if (grid.shape().size() != 3 || grid.dim(1) != grid.dim(2)) {
        throw ShapeError("spatial_to_tokens: expected square {D,S,S} grid");
    }
    const int64_t d = grid.dim(0), s = grid.dim(1);
    return transpose(reshape(grid, {d, s * s}));
}

Tensor emphasize(const Tensor& grid, const ProjectionBlockParams& p) {
    Tensor enc = conv2d(grid, p.enc_w, p.enc_b, 1);
    return conv2d(gelu(add_channel(enc, p.delta, 1.0)), p.dec_w, p.dec_b, 1);
}

Tensor undermine(const Tensor& grid, const ProjectionBlockParams& p) {
    Tensor enc = conv2d(grid, p.enc_w, p.enc_b, 1);
    return conv2d(gelu(add_channel(enc, p.delta, -1.0)), p.dec_w, p.dec_b, 1);
}

namespace {

Tensor dcp_grid(const Tensor& grid, const DcpLayerParams& p) {
    Tensor he = emphasize(grid, p.em1);
    Tensor hu = undermine(he, p.un);
    Tensor residual = emphasize(sub(hu, scale(he, p.alpha)), p.em2);
    return add(scale(he, p.beta), residual);
}

}  // namespace

Tensor dcp_forward(const Tensor& tokens, int64_t split, const DcpLayerParams& p) {
    Tensor z_part = slice(tokens, 0, 0, split);
    Tensor x_part = slice(tokens, 0, split, tokens.dim(0) - split);
    Tensor pz = spatial_to_tokens(dcp_grid(tokens_to_spatial(z_part), p));
    Tensor px = spatial_to_tokens(dcp_grid(tokens_to_spatial(x_part), p));
    return concat({pz, px}, 0);
}

Tensor gfa_prompt_chain(const Tensor& prompt, const Tensor& chained_prev, const Tensor& gamma) {
    Tensor g = sigmoid(gamma);
    Tensor one_minus_g = add_const(mul_const(g, -1.0), 1.0);
    return add(scale(prompt, g), scale(chained_prev, one_minus_g));
}

Tensor inject(const Tensor& tokens, const Tensor& prompt, const Tensor* gate_logits) {
    if (tokens.shape() != prompt.shape()) {
        throw ShapeError("inject: prompt shape " + shape_str(prompt.shape()) +
                         " does not match tokens " + shape_str(tokens.shape()));
    }
    if (!gate_logits) return add(tokens, prompt);
    if (gate_logits->shape().size() != 1 || gate_logits->dim(0) != tokens.dim(0)) {
        throw ShapeError("inject: expected one gate logit per token");
    }
    return add(tokens, row_scale(prompt, sigmoid(*gate_logits)));
}

}  // namespace nighttrack
