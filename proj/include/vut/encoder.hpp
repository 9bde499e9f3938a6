#pragma once

#include <string>
#include <vector>

#include "vut/embedders.hpp"
#include "vut/model_config.hpp"
#include "vut/param_store.hpp"

namespace vut {

// Additive logit bias from key validity: 0 where usable, -1e9 where padded;
// shape [1, n]. Undefined tensor when everything is valid.
Tensor attention_bias(const std::vector<bool>& valid, DType dt);

// [t, t] bias hiding positions j > i from row i.
Tensor causal_bias(int64_t t, DType dt);

// Multi-head scaled dot-product attention over pre-projection inputs
// ([rows, d_model] each). `bias`, when defined, is added to every head's
// logits. `ordered` routes matmuls through the fixed-accumulation kernel so
// existing rows keep their bits as the sequence grows.
Var multihead_attention(GraphContext& ctx, const std::string& prefix, int heads, const Var& q_in,
                        const Var& k_in, const Var& v_in, const Tensor& bias, double dropout_rate,
                        bool ordered = false);

// Pre-norm single-tower encoder over the fused image+structure sequence.
// Positional embeddings enter q and k at every layer; values carry content
// only. Returns [(M+N), d_model]; rows [0,M) are image tokens.
Var encoder_forward(GraphContext& ctx, const ModelConfig& cfg, const FusedInput& in);

void register_attention_params(ParamStore& params, const std::string& prefix, int64_t d_model,
                               int64_t qkv_dim, int heads, const RngStream& init, DType dt);
void register_encoder_params(ParamStore& params, const ModelConfig& cfg, const RngStream& init);

}  // namespace vut
