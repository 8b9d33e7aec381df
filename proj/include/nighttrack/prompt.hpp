#pragma once

#include <string>
#include <vector>

#include "nighttrack/backbone.hpp"
#include "nighttrack/tensor.hpp"

namespace nighttrack {

// Which prompting mechanisms are active. The gated-aggregation flags only
// make sense on top of the prompter itself.
struct AblationProfile {
    bool enable_dcp = false;
    bool enable_gfa_pp = false;  // gated chain between adjacent prompts
    bool enable_gfa_pb = false;  // token-wise gated injection

    void validate() const;
    static AblationProfile from_string(const std::string& name);
    std::string to_string() const;

    static AblationProfile base() { return {}; }
    static AblationProfile dcp() { return {true, false, false}; }
    static AblationProfile dcp_gfa_pp() { return {true, true, false}; }
    static AblationProfile dcp_gfa_full() { return {true, true, true}; }
};

// Encode-decode block with a learned per-channel offset between them. The
// emphasize variant adds the offset, the undermine variant subtracts it.
struct ProjectionBlockParams {
    Tensor enc_w, enc_b;  // 3x3 conv, D -> D/r
    Tensor delta;         // {D/r}
    Tensor dec_w, dec_b;  // 3x3 conv, D/r -> D
};

struct DcpLayerParams {
    ProjectionBlockParams em1;  // first emphasize
    ProjectionBlockParams un;   // undermine
    ProjectionBlockParams em2;  // residual emphasize (decode zero-initialized)
    Tensor alpha;               // {1}
    Tensor beta;                // {1}
};

struct GfaParams {
    std::vector<Tensor> chain_gammas;  // {1} per layer l >= 2
    std::vector<Tensor> token_gammas;  // {M} per layer
};

// Token matrix part -> D-channel square spatial grid and back; both are pure
// permutations and round-trip exactly.
Tensor tokens_to_spatial(const Tensor& tokens_part);
Tensor spatial_to_tokens(const Tensor& grid);

// Dec(gelu(Enc(x) + delta)) and Dec(gelu(Enc(x) - delta)).
Tensor emphasize(const Tensor& grid, const ProjectionBlockParams& p);
Tensor undermine(const Tensor& grid, const ProjectionBlockParams& p);

// One prompt from the pre-injection features of the previous layer:
//   H_E = em1(H);  H_U = un(H_E);  P = beta*H_E + em2(H_U - alpha*H_E)
// computed on the template and search grids separately with shared weights.
Tensor dcp_forward(const Tensor& tokens, int64_t split, const DcpLayerParams& p);

// P_g^l = g * P^l + (1-g) * P_g^{l-1}, g = sigmoid(gamma).
Tensor gfa_prompt_chain(const Tensor& prompt, const Tensor& chained_prev, const Tensor& gamma);

// H + gate_i * P per token row; gate_logits == nullptr means gate fixed at 1.
Tensor inject(const Tensor& tokens, const Tensor& prompt, const Tensor* gate_logits);

}  // namespace nighttrack
