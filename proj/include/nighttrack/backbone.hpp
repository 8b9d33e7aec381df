#pragma once

#include <cstdint>
#include <string>

#include "nighttrack/tensor.hpp"

namespace nighttrack {

struct BackboneConfig {
    int template_size = 64;
    int search_size = 128;
    int patch_size = 8;
    int embed_dim = 64;
    int num_layers = 4;
    int num_heads = 4;
    int mlp_ratio = 4;

    int64_t tokens_template() const {
        const int64_t g = template_size / patch_size;
        return g * g;
    }
    int64_t tokens_search() const {
        const int64_t g = search_size / patch_size;
        return g * g;
    }
    int64_t tokens_total() const { return tokens_template() + tokens_search(); }

    void validate() const;

    static BackboneConfig desk();   // 64/128, D=64, N=4
    static BackboneConfig small();  // 32/64,  D=32, N=2
    static BackboneConfig tiny();   // 16/32,  D=8,  N=2 (M=20)
};

// Joint template+search token matrix with the recorded split point. The
// split is constant across layers: rows [0, split) are template tokens.
struct TokenState {
    Tensor tokens;      // {M, D}
    int64_t split = 0;  // M_z
    int layer = 0;
};

struct EmbedParams {
    Tensor proj_w;  // {3*P*P, D}, shared between template and search
    Tensor proj_b;  // {D}
    Tensor pos_z;   // {M_z, D}
    Tensor pos_x;   // {M_x, D}
};

struct EncoderLayerParams {
    Tensor ln1_gamma, ln1_beta;
    Tensor wq, bq, wk, bk, wv, bv;
    Tensor wo, bo;
    Tensor ln2_gamma, ln2_beta;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

struct CornerBranchParams {
    Tensor conv1_w, conv1_b;  // 3x3, D -> D/2
    Tensor conv2_w, conv2_b;  // 1x1, D/2 -> 1
};

struct CornerHeadParams {
    CornerBranchParams tl;  // predicts (x1, y1)
    CornerBranchParams br;  // predicts (x2, y2)
};

// Patch projection with positional embedding: {3,H,W} image in [0,1] to
// (H/P)*(W/P) tokens of dim D.
Tensor patch_embed(const Tensor& image, const EmbedParams& params, const Tensor& pos, int patch_size);

// Template tokens first, then search tokens.
TokenState concat_tokens(const Tensor& z_tokens, const Tensor& x_tokens);

// Pre-norm transformer layer: x + MHSA(LN(x)), then + MLP(LN(.)).
Tensor encoder_layer(const Tensor& tokens, const EncoderLayerParams& p, int num_heads);

// Spatial softmax over a {1,S,S} score map followed by the expectation over
// normalized cell centers; returns ({1} x, {1} y), each in [0,1] by
// convexity.
std::pair<Tensor, Tensor> soft_argmax(const Tensor& score_map);

// Search tokens reshaped to a grid, two conv branches each producing a score
// map, spatial softmax + expectation over cell centers. Output is a raw
// normalized corner tensor {x1,y1,x2,y2} in [0,1]^4; no post-processing.
Tensor corner_head(const TokenState& state, const CornerHeadParams& p);

}  // namespace nighttrack
