#include "nighttrack/backbone.hpp"

#include <cmath>

#include "nighttrack/ops.hpp"

namespace nighttrack {

void BackboneConfig::validate() const {
    if (template_size <= 0 || search_size <= 0 || patch_size <= 0) {
        throw ConfigError("backbone config: sizes must be positive");
    }
    if (template_size % patch_size != 0 || search_size % patch_size != 0) {
        throw ConfigError("backbone config: patch size must divide template and search sizes");
    }
    if (embed_dim % num_heads != 0) {
        throw ConfigError("backbone config: embed dim must be divisible by head count");
    }
    if (num_layers < 1 || mlp_ratio < 1) {
        throw ConfigError("backbone config: need at least one layer and mlp_ratio >= 1");
    }
    const int64_t gx = search_size / patch_size;
    if (gx * gx != tokens_search()) throw ConfigError("backbone config: non-square search grid");
}

BackboneConfig BackboneConfig::desk() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::small() {
    BackboneConfig c;
    c.template_size = 32;
    c.search_size = 64;
    c.patch_size = 8;
    c.embed_dim = 32;
    c.num_layers = 2;
    c.num_heads = 4;
    c.mlp_ratio = 4;
    return c;
}

BackboneConfig BackboneConfig::tiny() {
    BackboneConfig c;
    c.template_size = 16;
    c.search_size = 32;
    c.patch_size = 8;
    c.embed_dim = 8;
    c.num_layers = 2;
    c.num_heads = 2;
    c.mlp_ratio = 2;
    return c;
}

Tensor patch_embed(const Tensor& image, const EmbedParams& params, const Tensor& pos,
                   int patch_size) {
    Tensor patches = im2patches(image, patch_size);
    Tensor tokens = add_bias(matmul(patches, params.proj_w), params.proj_b);
    if (tokens.shape() != pos.shape()) {
        throw ShapeError("patch_embed: positional table " + shape_str(pos.shape()) +
                         " does not match tokens " + shape_str(tokens.shape()));
    }
    return add(tokens, pos);
}

TokenState concat_tokens(const Tensor& z_tokens, const Tensor& x_tokens) {
    if (z_tokens.shape().size() != 2 || x_tokens.shape().size() != 2 ||
        z_tokens.dim(1) != x_tokens.dim(1)) {
        throw ShapeError("concat_tokens: embed dims differ");
    }
    TokenState s;
    s.tokens = concat({z_tokens, x_tokens}, 0);
    s.split = z_tokens.dim(0);
    s.layer = 0;
    return s;
}

namespace {

Tensor attention(const Tensor& x, const EncoderLayerParams& p, int num_heads) {
    const int64_t d = x.dim(1);
    const int64_t dh = d / num_heads;
    Tensor q = add_bias(matmul(x, p.wq), p.bq);
    Tensor k = add_bias(matmul(x, p.wk), p.bk);
    Tensor v = add_bias(matmul(x, p.wv), p.bv);
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<Tensor> heads;
    heads.reserve(static_cast<size_t>(num_heads));
    for (int h = 0; h < num_heads; ++h) {
        Tensor qh = slice(q, 1, h * dh, dh);
        Tensor kh = slice(k, 1, h * dh, dh);
        Tensor vh = slice(v, 1, h * dh, dh);
        Tensor scores = mul_const(matmul(qh, transpose(kh)), inv_sqrt_dh);
        Tensor probs = softmax(scores);
        heads.push_back(matmul(probs, vh));
    }
    Tensor merged = concat(heads, 1);
    return add_bias(matmul(merged, p.wo), p.bo);
}

}  // namespace

Tensor encoder_layer(const Tensor& tokens, const EncoderLayerParams& p, int num_heads) {
    Tensor x = add(tokens, attention(layer_norm(tokens, p.ln1_gamma, p.ln1_beta), p, num_heads));
    Tensor h = gelu(add_bias(matmul(layer_norm(x, p.ln2_gamma, p.ln2_beta), p.mlp_w1), p.mlp_b1));
    return add(x, add_bias(matmul(h, p.mlp_w2), p.mlp_b2));
}

std::pair<Tensor, Tensor> soft_argmax(const Tensor& score_map) {
    if (score_map.shape().size() != 3 || score_map.dim(0) != 1 || score_map.dim(1) != score_map.dim(2)) {
        throw ShapeError("soft_argmax: expected a {1,S,S} score map");
    }
    const int64_t s = score_map.dim(1);
    Tensor flat = reshape(score_map, {1, s * s});
    Tensor probs = softmax(flat);

    std::vector<double> xs(static_cast<size_t>(s * s)), ys(static_cast<size_t>(s * s));
    for (int64_t i = 0; i < s; ++i) {
        for (int64_t j = 0; j < s; ++j) {
            xs[static_cast<size_t>(i * s + j)] = (static_cast<double>(j) + 0.5) / static_cast<double>(s);
            ys[static_cast<size_t>(i * s + j)] = (static_cast<double>(i) + 0.5) / static_cast<double>(s);
        }
    }
    Tensor coord_x = Tensor::from_data({1, s * s}, std::move(xs));
    Tensor coord_y = Tensor::from_data({1, s * s}, std::move(ys));
    return {sum(mul(probs, coord_x)), sum(mul(probs, coord_y))};
}

namespace {

Tensor branch_scores(const Tensor& grid, const CornerBranchParams& p) {
    Tensor h = gelu(conv2d(grid, p.conv1_w, p.conv1_b, 1));
    return conv2d(h, p.conv2_w, p.conv2_b, 0);
}

}  // namespace

Tensor corner_head(const TokenState& state, const CornerHeadParams& p) {
    const int64_t m = state.tokens.dim(0);
    const int64_t d = state.tokens.dim(1);
    const int64_t mx = m - state.split;
    const int64_t s = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(mx))));
    if (s * s != mx) throw ShapeError("corner_head: search token count is not a perfect square");

    Tensor search = slice(state.tokens, 0, state.split, mx);
    Tensor grid = reshape(transpose(search), {d, s, s});

    auto [x1, y1] = soft_argmax(branch_scores(grid, p.tl));
    auto [x2, y2] = soft_argmax(branch_scores(grid, p.br));
    return concat({x1, y1, x2, y2}, 0);
}

}  // namespace nighttrack
