#include "vut/encoder.hpp"

#include <cmath>

#include "vut/errors.hpp"

namespace vut {

namespace {
constexpr double kMaskedLogit = -1e9;
}

Tensor attention_bias(const std::vector<bool>& valid, DType dt) {
  bool any_masked = false;
  for (bool v : valid) any_masked |= !v;
  if (!any_masked) return Tensor();
  Tensor bias = Tensor::zeros({1, int64_t(valid.size())}, dt);
  for (size_t i = 0; i < valid.size(); ++i)
    if (!valid[i]) bias.set(int64_t(i), kMaskedLogit);
  return bias;
}

Tensor causal_bias(int64_t t, DType dt) {
  Tensor bias = Tensor::zeros({t, t}, dt);
  for (int64_t i = 0; i < t; ++i)
    for (int64_t j = i + 1; j < t; ++j) bias.set(i, j, kMaskedLogit);
  return bias;
}

Var multihead_attention(GraphContext& ctx, const std::string& prefix, int heads, const Var& q_in,
                        const Var& k_in, const Var& v_in, const Tensor& bias, double dropout_rate,
                        bool ordered) {
  auto mm = [&](const Var& a, const Var& b, bool ta, bool tb) {
    return ordered ? matmul_ordered(a, b, ta, tb) : matmul(a, b, ta, tb);
  };
  Var q = add(mm(q_in, ctx.param(prefix + ".wq"), false, false), ctx.param(prefix + ".bq"));
  Var k = add(mm(k_in, ctx.param(prefix + ".wk"), false, false), ctx.param(prefix + ".bk"));
  Var v = add(mm(v_in, ctx.param(prefix + ".wv"), false, false), ctx.param(prefix + ".bv"));
  int64_t dh = q.dim(1) / heads;
  if (dh * heads != q.dim(1))
    throw NumericError("attention: head count must divide the qkv width");
  double scale = 1.0 / std::sqrt(double(dh));
  Var bias_v = bias.defined()
                   ? Var::constant(bias.dtype() == q.dtype() ? bias : bias.astype(q.dtype()))
                   : Var();

  std::vector<Var> head_out;
  head_out.reserve(size_t(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var logits = mul_scalar(mm(qh, kh, false, true), scale);
    if (bias_v.defined()) logits = add(logits, bias_v);
    Var probs = softmax_rows(logits);
    probs = dropout(probs, dropout_rate, ctx.dropout_rng(), ctx.train());
    head_out.push_back(mm(probs, vh, false, false));
  }
  Var cat = heads == 1 ? head_out[0] : concat_cols(head_out);
  return add(mm(cat, ctx.param(prefix + ".wo"), false, false), ctx.param(prefix + ".bo"));
}

Var encoder_forward(GraphContext& ctx, const ModelConfig& cfg, const FusedInput& in) {
  bool any_valid = false;
  for (bool v : in.valid) any_valid |= v;
  if (!any_valid) throw NumericError("encoder: every position is masked out");
  Tensor bias = attention_bias(in.valid, cfg.dtype);
  Var x = in.c;
  for (int l = 0; l < cfg.enc_layers; ++l) {
    std::string prefix = "encoder.layer" + std::to_string(l);
    Var h = layer_norm_rows(x, ctx.param(prefix + ".ln1.gain"), ctx.param(prefix + ".ln1.bias"));
    Var qk = add(h, in.p);
    x = add(x, multihead_attention(ctx, prefix + ".attn", cfg.heads, qk, qk, h, bias,
                                   cfg.attn_dropout));
    Var h2 = layer_norm_rows(x, ctx.param(prefix + ".ln2.gain"), ctx.param(prefix + ".ln2.bias"));
    Var m = gelu(add(matmul(h2, ctx.param(prefix + ".mlp.w1")), ctx.param(prefix + ".mlp.b1")));
    m = add(matmul(m, ctx.param(prefix + ".mlp.w2")), ctx.param(prefix + ".mlp.b2"));
    m = dropout(m, cfg.mlp_dropout, ctx.dropout_rng(), ctx.train());
    x = add(x, m);
  }
  return x;
}

void register_attention_params(ParamStore& params, const std::string& prefix, int64_t d_model,
                               int64_t qkv_dim, int heads, const RngStream& init, DType dt) {
  if (heads < 1 || qkv_dim % heads != 0)
    throw NumericError("attention: head count must divide the qkv width");
  RngStream s = init.child("init/" + prefix);
  params.add(prefix + ".wq", init_linear(d_model, qkv_dim, s, dt));
  params.add(prefix + ".bq", Tensor::zeros({1, qkv_dim}, dt));
  params.add(prefix + ".wk", init_linear(d_model, qkv_dim, s, dt));
  params.add(prefix + ".bk", Tensor::zeros({1, qkv_dim}, dt));
  params.add(prefix + ".wv", init_linear(d_model, qkv_dim, s, dt));
  params.add(prefix + ".bv", Tensor::zeros({1, qkv_dim}, dt));
  params.add(prefix + ".wo", init_linear(qkv_dim, d_model, s, dt));
  params.add(prefix + ".bo", Tensor::zeros({1, d_model}, dt));
}

void register_encoder_params(ParamStore& params, const ModelConfig& cfg, const RngStream& init) {
  int64_t d = cfg.d_model;
  DType dt = cfg.dtype;
  for (int l = 0; l < cfg.enc_layers; ++l) {
    std::string prefix = "encoder.layer" + std::to_string(l);
    for (const char* ln : {".ln1", ".ln2"}) {
      params.add(prefix + ln + ".gain", Tensor::ones({1, d}, dt));
      params.add(prefix + ln + ".bias", Tensor::zeros({1, d}, dt));
    }
    register_attention_params(params, prefix + ".attn", d, cfg.qkv_dim, cfg.heads, init, dt);
    RngStream s = init.child("init/" + prefix + ".mlp");
    params.add(prefix + ".mlp.w1", init_linear(d, cfg.mlp_dim, s, dt));
    params.add(prefix + ".mlp.b1", Tensor::zeros({1, cfg.mlp_dim}, dt));
    params.add(prefix + ".mlp.w2", init_linear(cfg.mlp_dim, d, s, dt));
    params.add(prefix + ".mlp.b2", Tensor::zeros({1, d}, dt));
  }
}

}  // namespace vut
