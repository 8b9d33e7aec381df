#include "nighttrack/model.hpp"

#include <cmath>

#include "nighttrack/ops.hpp"
#include "nighttrack/rng.hpp"

namespace nighttrack {

void ModelConfig::validate() const {
    backbone.validate();
    profile.validate();
    if (dcp_reduction < 1 || backbone.embed_dim % dcp_reduction != 0) {
        throw ConfigError("model config: reduction ratio must divide the embed dim");
    }
}

ModelConfig ModelConfig::desk(AblationProfile p) {
    ModelConfig c;
    c.backbone = BackboneConfig::desk();
    c.dcp_reduction = 32;
    c.profile = p;
    return c;
}

ModelConfig ModelConfig::small(AblationProfile p) {
    ModelConfig c;
    c.backbone = BackboneConfig::small();
    c.dcp_reduction = 8;
    c.profile = p;
    return c;
}

ModelConfig ModelConfig::tiny(AblationProfile p) {
    ModelConfig c;
    c.backbone = BackboneConfig::tiny();
    c.dcp_reduction = 4;
    c.profile = p;
    return c;
}

namespace {

Tensor trunc_normal_tensor(Shape shape, Rng& rng, double std_dev) {
    std::vector<double> v(static_cast<size_t>(numel_of(shape)));
    for (double& x : v) x = rng.trunc_normal(std_dev);
    return Tensor::from_data(std::move(shape), std::move(v));
}

constexpr double kInitStd = 0.02;

}  // namespace

void TrackerModel::register_params(const ModelConfig& cfg, ModelParams& out, uint64_t seed) {
    cfg.validate();
    const BackboneConfig& bb = cfg.backbone;
    const int64_t d = bb.embed_dim;
    const int64_t patch_dim = 3LL * bb.patch_size * bb.patch_size;
    const int64_t hidden = d * bb.mlp_ratio;
    const int64_t head_mid = std::max<int64_t>(1, d / 2);
    const int64_t c_red = d / cfg.dcp_reduction;
    Rng rng(seed);

    out.add("embed.proj.w", trunc_normal_tensor({patch_dim, d}, rng, kInitStd), ParamTag::backbone);
    out.add("embed.proj.b", Tensor::zeros({d}), ParamTag::backbone);
    out.add("embed.pos_z", trunc_normal_tensor({bb.tokens_template(), d}, rng, kInitStd),
            ParamTag::backbone);
    out.add("embed.pos_x", trunc_normal_tensor({bb.tokens_search(), d}, rng, kInitStd),
            ParamTag::backbone);

    for (int l = 0; l < bb.num_layers; ++l) {
        const std::string pre = "enc." + std::to_string(l) + ".";
        out.add(pre + "ln1.gamma", Tensor::full({d}, 1.0), ParamTag::backbone);
        out.add(pre + "ln1.beta", Tensor::zeros({d}), ParamTag::backbone);
        for (const char* nm : {"q", "k", "v"}) {
            out.add(pre + "attn.w" + nm, trunc_normal_tensor({d, d}, rng, kInitStd), ParamTag::backbone);
            out.add(pre + "attn.b" + nm, Tensor::zeros({d}), ParamTag::backbone);
        }
        out.add(pre + "attn.wo", trunc_normal_tensor({d, d}, rng, kInitStd), ParamTag::backbone);
        out.add(pre + "attn.bo", Tensor::zeros({d}), ParamTag::backbone);
        out.add(pre + "ln2.gamma", Tensor::full({d}, 1.0), ParamTag::backbone);
        out.add(pre + "ln2.beta", Tensor::zeros({d}), ParamTag::backbone);
        out.add(pre + "mlp.w1", trunc_normal_tensor({d, hidden}, rng, kInitStd), ParamTag::backbone);
        out.add(pre + "mlp.b1", Tensor::zeros({hidden}), ParamTag::backbone);
        out.add(pre + "mlp.w2", trunc_normal_tensor({hidden, d}, rng, kInitStd), ParamTag::backbone);
        out.add(pre + "mlp.b2", Tensor::zeros({d}), ParamTag::backbone);
    }

    for (const char* br : {"tl", "br"}) {
        const std::string pre = std::string("head.") + br + ".";
        out.add(pre + "conv1.w", trunc_normal_tensor({head_mid, d, 3, 3}, rng, kInitStd), ParamTag::head);
        out.add(pre + "conv1.b", Tensor::zeros({head_mid}), ParamTag::head);
        out.add(pre + "conv2.w", trunc_normal_tensor({1, head_mid, 1, 1}, rng, kInitStd), ParamTag::head);
        out.add(pre + "conv2.b", Tensor::zeros({1}), ParamTag::head);
    }

    if (cfg.profile.enable_dcp) {
        for (int l = 0; l < bb.num_layers; ++l) {
            const std::string pre = "dcp." + std::to_string(l) + ".";
            for (const char* blk : {"em1", "un", "em2"}) {
                const std::string bp = pre + blk + ".";
                out.add(bp + "enc.w", trunc_normal_tensor({c_red, d, 3, 3}, rng, kInitStd), ParamTag::dcp);
                out.add(bp + "enc.b", Tensor::zeros({c_red}), ParamTag::dcp);
                out.add(bp + "delta", Tensor::zeros({c_red}), ParamTag::dcp);
                // The residual decode starts at zero so prompts vanish at
                // init and tuning starts exactly from the frozen baseline.
                if (std::string(blk) == "em2") {
                    out.add(bp + "dec.w", Tensor::zeros({d, c_red, 3, 3}), ParamTag::dcp);
                } else {
                    out.add(bp + "dec.w", trunc_normal_tensor({d, c_red, 3, 3}, rng, kInitStd),
                            ParamTag::dcp);
                }
                out.add(bp + "dec.b", Tensor::zeros({d}), ParamTag::dcp);
            }
            out.add(pre + "alpha", Tensor::full({1}, 1.0), ParamTag::dcp);
            out.add(pre + "beta", Tensor::zeros({1}), ParamTag::dcp);
        }
        if (cfg.profile.enable_gfa_pp) {
            for (int l = 1; l < bb.num_layers; ++l) {
                out.add("gfa.chain." + std::to_string(l), Tensor::zeros({1}), ParamTag::gfa);
            }
        }
        if (cfg.profile.enable_gfa_pb) {
            for (int l = 0; l < bb.num_layers; ++l) {
                out.add("gfa.tok." + std::to_string(l), Tensor::zeros({bb.tokens_total()}),
                        ParamTag::gfa);
            }
        }
    }
}

TrackerModel::TrackerModel(ModelConfig cfg, ModelParams params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    wire();
}

TrackerModel TrackerModel::init(const ModelConfig& cfg, uint64_t seed) {
    ModelParams params;
    register_params(cfg, params, seed);
    return TrackerModel(cfg, std::move(params));
}

TrackerModel TrackerModel::from_base(const ModelConfig& cfg, const ModelParams& base) {
    ModelParams params;
    // Prompt parameters take the designed init; the seed only shapes their
    // non-zero conv weights.
    register_params(cfg, params, /*seed=*/1);
    for (auto& p : params.all()) {
        if (p.tag == ParamTag::backbone || p.tag == ParamTag::head) {
            const Param& src = base.at(p.name);
            if (src.value.shape() != p.value.shape()) {
                throw CheckpointError("from_base: shape mismatch for " + p.name);
            }
            p.value.data() = src.value.data();
            p.frozen = true;
            p.value.set_requires_grad(false);
        }
    }
    return TrackerModel(cfg, std::move(params));
}

void TrackerModel::wire() {
    const BackboneConfig& bb = cfg_.backbone;
    embed_ = EmbedParams{params_.tensor("embed.proj.w"), params_.tensor("embed.proj.b"),
                         params_.tensor("embed.pos_z"), params_.tensor("embed.pos_x")};
    layers_.clear();
    for (int l = 0; l < bb.num_layers; ++l) {
        const std::string pre = "enc." + std::to_string(l) + ".";
        EncoderLayerParams lp;
        lp.ln1_gamma = params_.tensor(pre + "ln1.gamma");
        lp.ln1_beta = params_.tensor(pre + "ln1.beta");
        lp.wq = params_.tensor(pre + "attn.wq");
        lp.bq = params_.tensor(pre + "attn.bq");
        lp.wk = params_.tensor(pre + "attn.wk");
        lp.bk = params_.tensor(pre + "attn.bk");
        lp.wv = params_.tensor(pre + "attn.wv");
        lp.bv = params_.tensor(pre + "attn.bv");
        lp.wo = params_.tensor(pre + "attn.wo");
        lp.bo = params_.tensor(pre + "attn.bo");
        lp.ln2_gamma = params_.tensor(pre + "ln2.gamma");
        lp.ln2_beta = params_.tensor(pre + "ln2.beta");
        lp.mlp_w1 = params_.tensor(pre + "mlp.w1");
        lp.mlp_b1 = params_.tensor(pre + "mlp.b1");
        lp.mlp_w2 = params_.tensor(pre + "mlp.w2");
        lp.mlp_b2 = params_.tensor(pre + "mlp.b2");
        layers_.push_back(std::move(lp));
    }
    auto branch = [&](const std::string& pre) {
        return CornerBranchParams{params_.tensor(pre + "conv1.w"), params_.tensor(pre + "conv1.b"),
                                  params_.tensor(pre + "conv2.w"), params_.tensor(pre + "conv2.b")};
    };
    head_ = CornerHeadParams{branch("head.tl."), branch("head.br.")};

    dcp_.clear();
    gfa_ = GfaParams{};
    if (cfg_.profile.enable_dcp) {
        for (int l = 0; l < bb.num_layers; ++l) {
            const std::string pre = "dcp." + std::to_string(l) + ".";
            auto block = [&](const std::string& blk) {
                const std::string bp = pre + blk + ".";
                return ProjectionBlockParams{params_.tensor(bp + "enc.w"), params_.tensor(bp + "enc.b"),
                                             params_.tensor(bp + "delta"), params_.tensor(bp + "dec.w"),
                                             params_.tensor(bp + "dec.b")};
            };
            DcpLayerParams dp{block("em1"), block("un"), block("em2"),
                              params_.tensor(pre + "alpha"), params_.tensor(pre + "beta")};
            dcp_.push_back(std::move(dp));
        }
        if (cfg_.profile.enable_gfa_pp) {
            for (int l = 1; l < bb.num_layers; ++l) {
                gfa_.chain_gammas.push_back(params_.tensor("gfa.chain." + std::to_string(l)));
            }
        }
        if (cfg_.profile.enable_gfa_pb) {
            for (int l = 0; l < bb.num_layers; ++l) {
                gfa_.token_gammas.push_back(params_.tensor("gfa.tok." + std::to_string(l)));
            }
        }
    }
}

TokenState TrackerModel::forward_tokens(const Tensor& template_img, const Tensor& search_img) const {
    const BackboneConfig& bb = cfg_.backbone;
    Tensor z = patch_embed(template_img, embed_, embed_.pos_z, bb.patch_size);
    Tensor x = patch_embed(search_img, embed_, embed_.pos_x, bb.patch_size);
    TokenState state = concat_tokens(z, x);

    Tensor chained;  // P_g^{l-1}
    for (int l = 0; l < bb.num_layers; ++l) {
        if (cfg_.profile.enable_dcp) {
            // The prompter taps the pre-injection feature stream.
            Tensor prompt = dcp_forward(state.tokens, state.split, dcp_[static_cast<size_t>(l)]);
            if (cfg_.profile.enable_gfa_pp) {
                chained = (l == 0)
                              ? prompt
                              : gfa_prompt_chain(prompt, chained,
                                                 gfa_.chain_gammas[static_cast<size_t>(l - 1)]);
                prompt = chained;
            }
            const Tensor* gates = cfg_.profile.enable_gfa_pb
                                      ? &gfa_.token_gammas[static_cast<size_t>(l)]
                                      : nullptr;
            state.tokens = inject(state.tokens, prompt, gates);
        }
        state.tokens = encoder_layer(state.tokens, layers_[static_cast<size_t>(l)], bb.num_heads);
        state.layer = l + 1;
    }
    return state;
}

Tensor TrackerModel::forward_box(const Tensor& template_img, const Tensor& search_img) const {
    return corner_head(forward_tokens(template_img, search_img), head_);
}

Tensor TrackerModel::forward_box(const Image& template_img, const Image& search_img) const {
    return forward_box(to_tensor(template_img), to_tensor(search_img));
}

}  // namespace nighttrack
