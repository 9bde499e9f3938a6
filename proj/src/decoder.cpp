#include "vut/decoder.hpp"

#include "vut/errors.hpp"

namespace vut {

Var decoder_forward(GraphContext& ctx, const ModelConfig& cfg, const std::vector<int>& tokens,
                    const Var& memory, const Tensor& memory_bias) {
  int64_t t = int64_t(tokens.size());
  if (t < 1) throw DataError("decoder: empty token sequence");
  if (t > cfg.max_len)
    throw DataError("decoder: sequence of " + std::to_string(t) +
                    " tokens exceeds the decoding length limit");
  for (int id : tokens)
    if (id < 0 || id >= cfg.vocab_size)
      throw DataError("decoder: token id outside the vocabulary");

  Var x = add(embedding_rows(ctx.param("decoder.tok"), tokens),
              slice_rows(ctx.param("decoder.pos"), 0, t));
  // One dropout pass over the encoder memory, shared by all cross-attention
  // layers.
  Var mem = dropout(memory, cfg.enc_dropout_before_cross, ctx.dropout_rng(), ctx.train());
  Tensor causal = causal_bias(t, cfg.dtype);

  for (int l = 0; l < cfg.dec_layers; ++l) {
    std::string prefix = "decoder.layer" + std::to_string(l);
    auto ln = [&](const Var& v, const char* which) {
      return layer_norm_rows(v, ctx.param(prefix + which + ".gain"),
                             ctx.param(prefix + which + ".bias"));
    };
    Var h = ln(x, ".ln1");
    x = add(x, multihead_attention(ctx, prefix + ".self", cfg.dec_heads, h, h, h, causal,
                                   cfg.dec_dropout, /*ordered=*/true));
    Var h2 = ln(x, ".ln2");
    x = add(x, multihead_attention(ctx, prefix + ".cross", cfg.dec_heads, h2, mem, mem,
                                   memory_bias, cfg.cross_attn_dropout, /*ordered=*/true));
    Var h3 = ln(x, ".ln3");
    Var m = gelu(add(matmul_ordered(h3, ctx.param(prefix + ".mlp.w1")),
                     ctx.param(prefix + ".mlp.b1")));
    m = add(matmul_ordered(m, ctx.param(prefix + ".mlp.w2")), ctx.param(prefix + ".mlp.b2"));
    m = dropout(m, cfg.dec_dropout, ctx.dropout_rng(), ctx.train());
    x = add(x, m);
  }
  return x;
}

void register_decoder_params(ParamStore& params, const ModelConfig& cfg, const RngStream& init) {
  DType dt = cfg.dtype;
  int64_t d = cfg.d_model;
  {
    RngStream s = init.child("init/decoder.tok");
    params.add("decoder.tok", init_embedding(cfg.vocab_size, d, s, dt));
  }
  {
    RngStream s = init.child("init/decoder.pos");
    params.add("decoder.pos", init_embedding(cfg.max_len, d, s, dt));
  }
  for (int l = 0; l < cfg.dec_layers; ++l) {
    std::string prefix = "decoder.layer" + std::to_string(l);
    for (const char* ln : {".ln1", ".ln2", ".ln3"}) {
      params.add(prefix + ln + ".gain", Tensor::ones({1, d}, dt));
      params.add(prefix + ln + ".bias", Tensor::zeros({1, d}, dt));
    }
    register_attention_params(params, prefix + ".self", d, cfg.dec_qkv_dim, cfg.dec_heads, init,
                              dt);
    register_attention_params(params, prefix + ".cross", d, cfg.dec_qkv_dim, cfg.dec_heads, init,
                              dt);
    RngStream s = init.child("init/" + prefix + ".mlp");
    params.add(prefix + ".mlp.w1", init_linear(d, cfg.dec_mlp_dim, s, dt));
    params.add(prefix + ".mlp.b1", Tensor::zeros({1, cfg.dec_mlp_dim}, dt));
    params.add(prefix + ".mlp.w2", init_linear(cfg.dec_mlp_dim, d, s, dt));
    params.add(prefix + ".mlp.b2", Tensor::zeros({1, d}, dt));
  }
}

}  // namespace vut
