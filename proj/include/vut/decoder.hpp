#pragma once

#include <vector>

#include "vut/encoder.hpp"
#include "vut/model_config.hpp"
#include "vut/param_store.hpp"

namespace vut {

// Autoregressive hidden states over question+answer tokens: causal
// self-attention plus cross-attention into the encoder sequence (padded
// memory rows masked via memory_bias). Token and learned positional
// embeddings enter once, below the first layer. Returns [t, d_model].
//
// Every matmul rides the fixed-accumulation kernel, so extending the token
// sequence in eval mode leaves earlier rows bit-identical.
Var decoder_forward(GraphContext& ctx, const ModelConfig& cfg, const std::vector<int>& tokens,
                    const Var& memory, const Tensor& memory_bias);

void register_decoder_params(ParamStore& params, const ModelConfig& cfg, const RngStream& init);

}  // namespace vut
