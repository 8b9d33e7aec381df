#pragma once

#include <cstdint>
#include <vector>

#include "nighttrack/backbone.hpp"
#include "nighttrack/image.hpp"
#include "nighttrack/params.hpp"
#include "nighttrack/prompt.hpp"

namespace nighttrack {

struct ModelConfig {
    BackboneConfig backbone;
    int dcp_reduction = 32;  // r; DCP bottleneck has D/r channels
    AblationProfile profile;

    void validate() const;

    static ModelConfig desk(AblationProfile p = AblationProfile::base());
    static ModelConfig small(AblationProfile p = AblationProfile::base());
    static ModelConfig tiny(AblationProfile p = AblationProfile::base());
};

// The full tracker: frozen-able backbone plus optional prompt blocks, with
// every parameter registered by name in deterministic checkpoint order.
class TrackerModel {
public:
    // Fresh parameters. Backbone/head get truncated-normal projections and
    // zero biases; prompt blocks get the designed zero-start (beta = 0,
    // residual decode zeroed, all gate logits zero) so the prompted model
    // initially reproduces the plain backbone bit for bit.
    static TrackerModel init(const ModelConfig& cfg, uint64_t seed);

    // Prompt-tuning setup: backbone/head values copied from `base` and
    // frozen, prompt parameters freshly initialized per the profile.
    static TrackerModel from_base(const ModelConfig& cfg, const ModelParams& base);

    TrackerModel(ModelConfig cfg, ModelParams params);

    const ModelConfig& config() const { return cfg_; }
    ModelParams& params() { return params_; }
    const ModelParams& params() const { return params_; }

    // Final-layer token state for the given crops ({3,H,W} tensors in [0,1]).
    TokenState forward_tokens(const Tensor& template_img, const Tensor& search_img) const;
    // Raw normalized corner box {4}.
    Tensor forward_box(const Tensor& template_img, const Tensor& search_img) const;
    Tensor forward_box(const Image& template_img, const Image& search_img) const;

    // Registers the parameter tensors for one model; exposed for tests.
    static void register_params(const ModelConfig& cfg, ModelParams& out, uint64_t seed);

private:
    struct Wiring;  // name -> typed param views, built once
    ModelConfig cfg_;
    ModelParams params_;

    EmbedParams embed_;
    std::vector<EncoderLayerParams> layers_;
    CornerHeadParams head_;
    std::vector<DcpLayerParams> dcp_;
    GfaParams gfa_;

    void wire();
};

}  // namespace nighttrack
