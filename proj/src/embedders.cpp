#include "vut/embedders.hpp"

#include <cmath>
#include <numbers>

#include "vut/errors.hpp"

namespace vut {

namespace {

Tensor gaussian_tensor(Shape shape, double sd, RngStream& rng, DType dt) {
  Tensor t = Tensor::zeros(std::move(shape), dt);
  dispatch_dtype(dt, [&](auto tag) {
    using T = decltype(tag);
    for (auto& v : t.mutable_data<T>()) v = T(rng.gaussian(0.0, sd));
  });
  return t;
}

// Group normalization over a [rows x channels] feature block: statistics are
// shared across all positions inside each channel group.
Var group_norm(GraphContext& ctx, const std::string& prefix, const Var& x, int groups) {
  int64_t c = x.dim(1);
  if (groups < 1 || c % groups != 0)
    throw NumericError("group norm: channel count not divisible by group count");
  int64_t per = c / groups;
  std::vector<Var> parts;
  parts.reserve(size_t(groups));
  for (int g = 0; g < groups; ++g)
    parts.push_back(normalize_global(slice_cols(x, g * per, per)));
  Var norm = groups == 1 ? parts[0] : concat_cols(parts);
  return add(mul(norm, ctx.param(prefix + ".gain")), ctx.param(prefix + ".bias"));
}

// [cos(2*pi*x B); sin(2*pi*x B)] / sqrt(F), lifted to d_model by a two-layer MLP.
Var fourier_group(GraphContext& ctx, const std::string& prefix, const Tensor& x, int fourier_dim) {
  Var proj = mul_scalar(matmul(Var::constant(x), ctx.param(prefix + ".B")),
                        2.0 * std::numbers::pi);
  Var feats = mul_scalar(concat_cols({cos_of(proj), sin_of(proj)}),
                         1.0 / std::sqrt(double(fourier_dim)));
  Var h = gelu(add(matmul(feats, ctx.param(prefix + ".mlp.w1")), ctx.param(prefix + ".mlp.b1")));
  return add(matmul(h, ctx.param(prefix + ".mlp.w2")), ctx.param(prefix + ".mlp.b2"));
}

Var pad_rows(const Var& x, int64_t rows, const ModelConfig& cfg) {
  int64_t missing = rows - x.dim(0);
  if (missing == 0) return x;
  return concat_rows({x, Var::constant(Tensor::zeros({missing, cfg.d_model}, cfg.dtype))});
}

}  // namespace

NodeFeatures node_features(const Screen& screen, const Vocabulary& vocab) {
  NodeFeatures out;
  for (const ViewNode* node : screen.flattened) {
    out.type_ids.push_back(node->type_id);
    out.clickable.push_back(node->clickable ? 1 : 0);
    std::vector<int> toks;
    toks.reserve(node->text.size());
    for (const auto& w : node->text) toks.push_back(vocab.id(w));
    out.text_tokens.push_back(std::move(toks));
    out.boxes.push_back(node->bbox.coords());
    out.dom.push_back({double(node->pre_idx), double(node->post_idx), double(node->depth)});
  }
  return out;
}

Var image_content(GraphContext& ctx, const ModelConfig& cfg, const Tensor& raster) {
  if (raster.rank() != 3 || raster.dim(2) != 3)
    throw NumericError("image embedder: raster must be [H,W,3]");
  if (raster.dim(0) != cfg.raster_h || raster.dim(1) != cfg.raster_w)
    throw DataError("image embedder: raster size does not match the configuration");
  Tensor r = raster.dtype() == cfg.dtype ? raster : raster.astype(cfg.dtype);
  Var x = Var::constant(std::move(r));
  for (size_t i = 0; i < cfg.backbone_channels.size(); ++i) {
    std::string block = "backbone.block" + std::to_string(i);
    if (i > 0) {
      // Back to image layout for the next convolution.
      int64_t side_h = cfg.raster_h >> i, side_w = cfg.raster_w >> i;
      x = reshape(x, {side_h, side_w, x.dim(1)});
    }
    Var y = conv2d(x, ctx.param(block + ".w"), ctx.param(block + ".b"), 2, 1);
    y = reshape(y, {y.dim(0) * y.dim(1), y.dim(2)});
    x = gelu(group_norm(ctx, block + ".gn", y, cfg.group_norm_groups));
  }
  return add(matmul(x, ctx.param("img_proj.w")), ctx.param("img_proj.b"));
}

Tensor image_positional(const ModelConfig& cfg) {
  int gh = cfg.grid_h(), gw = cfg.grid_w(), d = cfg.d_model;
  if (d % 4 != 0) throw NumericError("sinusoidal encoding: d_model must be divisible by 4");
  int half = d / 2;
  double scale = 2.0 * std::numbers::pi;
  double temperature = 10000.0;
  Tensor out = Tensor::zeros({int64_t(gh) * gw, d}, cfg.dtype);
  for (int i = 0; i < gh; ++i)
    for (int j = 0; j < gw; ++j) {
      int64_t row = int64_t(i) * gw + j;
      double ye = double(i + 1) / double(gh) * scale;
      double xe = double(j + 1) / double(gw) * scale;
      for (int p = 0; p < half / 2; ++p) {
        double t = std::pow(temperature, 2.0 * p / double(half));
        out.set(row, 2 * p, std::sin(ye / t));
        out.set(row, 2 * p + 1, std::cos(ye / t));
        out.set(row, half + 2 * p, std::sin(xe / t));
        out.set(row, half + 2 * p + 1, std::cos(xe / t));
      }
    }
  return out;
}

Var hierarchy_content(GraphContext& ctx, const ModelConfig& cfg, const NodeFeatures& nodes) {
  int n = nodes.count();
  if (n > cfg.n_queries) throw DataError("hierarchy embedder: more nodes than slots");
  if (n == 0) return Var::constant(Tensor::zeros({cfg.n_queries, cfg.d_model}, cfg.dtype));

  Var types = embedding_rows(ctx.param("embed.type"), nodes.type_ids);
  Var clicks = embedding_rows(ctx.param("embed.click"), nodes.clickable);

  // Per-node text feature: element-wise max over the token embeddings, zero
  // when the node carries no text.
  std::vector<Var> text_rows;
  text_rows.reserve(size_t(n));
  Var zero_row = Var::constant(Tensor::zeros({1, cfg.d_model}, cfg.dtype));
  for (const auto& toks : nodes.text_tokens) {
    if (toks.empty()) {
      text_rows.push_back(zero_row);
    } else {
      text_rows.push_back(reduce_max_axis0(embedding_rows(ctx.param("embed.tok"), toks)));
    }
  }
  Var content = add(add(types, clicks), concat_rows(text_rows));
  return pad_rows(content, cfg.n_queries, cfg);
}

Var hierarchy_positional(GraphContext& ctx, const ModelConfig& cfg, const NodeFeatures& nodes,
                         bool absent) {
  if (absent) return ctx.param("pe.query");
  int n = nodes.count();
  if (n == 0) throw DataError("hierarchy embedder: present hierarchy has no nodes");

  std::vector<double> box_vals, dom_vals;
  box_vals.reserve(size_t(n) * 4);
  dom_vals.reserve(size_t(n) * 3);
  double inv = 1.0 / double(cfg.n_queries);
  for (int i = 0; i < n; ++i) {
    for (double v : nodes.boxes[size_t(i)]) box_vals.push_back(v);
    for (double v : nodes.dom[size_t(i)]) dom_vals.push_back(v * inv);
  }
  Tensor boxes = Tensor::from_values({n, 4}, box_vals, cfg.dtype);
  Tensor dom = Tensor::from_values({n, 3}, dom_vals, cfg.dtype);
  Var pos = add(fourier_group(ctx, "pe.fourier.bbox", boxes, cfg.fourier_dim),
                fourier_group(ctx, "pe.fourier.dom", dom, cfg.fourier_dim));
  return pad_rows(pos, cfg.n_queries, cfg);
}

FocusMaps focus_maps(const ModelConfig& cfg, const std::optional<Box>& t_bbx,
                     const std::optional<int>& t_idx, int n_valid_nodes) {
  int m = cfg.m_tokens(), n = cfg.n_queries;
  FocusMaps maps{Tensor::ones({m}, DType::F64), Tensor::ones({n}, DType::F64)};
  // beta == tau makes every map uniform; keep the all-ones tensors bit-exact
  // rather than round-tripping through exp.
  if (cfg.focus_beta == cfg.focus_tau) return maps;

  auto sharpen = [&](Tensor& alpha, const std::vector<bool>& in_focus, int valid) {
    std::vector<double> e(static_cast<size_t>(valid));
    double denom = 0.0;
    for (int i = 0; i < valid; ++i) {
      e[size_t(i)] = std::exp(in_focus[size_t(i)] ? cfg.focus_beta : cfg.focus_tau);
      denom += e[size_t(i)];
    }
    auto a = alpha.mutable_data<double>();
    for (int i = 0; i < valid; ++i) a[size_t(i)] = e[size_t(i)] / denom * valid;
    for (int i = valid; i < int(a.size()); ++i) a[size_t(i)] = 0.0;
  };

  if (t_bbx) {
    if (t_bbx->bottom <= 0.0 || t_bbx->top >= 1.0 || t_bbx->right <= 0.0 || t_bbx->left >= 1.0)
      throw DataError("focus box lies entirely outside the raster");
    int gh = cfg.grid_h(), gw = cfg.grid_w();
    std::vector<bool> in_focus(size_t(m), false);
    int hits = 0;
    for (int i = 0; i < gh; ++i)
      for (int j = 0; j < gw; ++j) {
        double cy = (i + 0.5) / gh, cx = (j + 0.5) / gw;
        if (cy >= t_bbx->top && cy <= t_bbx->bottom && cx >= t_bbx->left && cx <= t_bbx->right) {
          in_focus[size_t(i) * size_t(gw) + size_t(j)] = true;
          ++hits;
        }
      }
    // A box narrower than a grid cell can miss every cell centre.  The mask
    // is then all zeros, the logits are uniformly tau, and the softmax is the
    // uniform map we already hold -- so only sharpen when something was hit.
    if (hits > 0) sharpen(maps.alpha_s, in_focus, m);
  }
  if (t_idx) {
    if (*t_idx < 0 || *t_idx >= n_valid_nodes)
      throw DataError("focus node index is outside the hierarchy");
    std::vector<bool> in_focus(size_t(n_valid_nodes), false);
    in_focus[size_t(*t_idx)] = true;
    sharpen(maps.alpha_v, in_focus, n_valid_nodes);
  }
  return maps;
}

Var apply_focus(const Var& content, const Tensor& alpha) {
  return scale_rows(content, alpha);
}

FusedInput fuse(GraphContext& ctx, const ModelConfig& cfg, const Var& c_s, const Tensor& p_s,
                const Var& c_v, const Var& p_v, int n_valid_nodes) {
  FusedInput out;
  out.m = cfg.m_tokens();
  out.c = concat_rows({c_s, c_v});
  Var ps = add(Var::constant(p_s.dtype() == cfg.dtype ? p_s : p_s.astype(cfg.dtype)),
               ctx.param("modal.E_s"));
  Var pv = add(p_v, ctx.param("modal.E_v"));
  out.p = concat_rows({ps, pv});
  out.valid.assign(size_t(out.m), true);
  out.valid.resize(size_t(out.m + cfg.n_queries), false);
  for (int i = 0; i < n_valid_nodes; ++i) out.valid[size_t(out.m + i)] = true;
  return out;
}

void register_image_embedder_params(ParamStore& params, const ModelConfig& cfg,
                                    const RngStream& init) {
  DType dt = cfg.dtype;
  int64_t d = cfg.d_model;
  int in_ch = 3;
  for (size_t i = 0; i < cfg.backbone_channels.size(); ++i) {
    std::string block = "backbone.block" + std::to_string(i);
    int out_ch = cfg.backbone_channels[i];
    RngStream s = init.child("init/" + block);
    params.add(block + ".w", init_conv(3, in_ch, out_ch, s, dt));
    params.add(block + ".b", Tensor::zeros({1, out_ch}, dt));
    params.add(block + ".gn.gain", Tensor::ones({1, out_ch}, dt));
    params.add(block + ".gn.bias", Tensor::zeros({1, out_ch}, dt));
    in_ch = out_ch;
  }
  {
    RngStream s = init.child("init/img_proj");
    params.add("img_proj.w", init_linear(in_ch, d, s, dt));
    params.add("img_proj.b", Tensor::zeros({1, d}, dt));
  }
  {
    RngStream s = init.child("init/modal");
    params.add("modal.E_s", init_embedding(1, d, s, dt));
    params.add("modal.E_v", init_embedding(1, d, s, dt));
  }
}

void register_query_slot_params(ParamStore& params, const ModelConfig& cfg,
                                const RngStream& init) {
  RngStream s = init.child("init/pe.query");
  params.add("pe.query", init_embedding(cfg.n_queries, cfg.d_model, s, cfg.dtype));
}

void register_hierarchy_embedder_params(ParamStore& params, const ModelConfig& cfg,
                                        const RngStream& init) {
  DType dt = cfg.dtype;
  int64_t d = cfg.d_model;
  {
    RngStream s = init.child("init/embed.type");
    params.add("embed.type", init_embedding(cfg.n_types, d, s, dt));
  }
  {
    RngStream s = init.child("init/embed.click");
    params.add("embed.click", init_embedding(2, d, s, dt));
  }
  {
    RngStream s = init.child("init/embed.tok");
    params.add("embed.tok", init_embedding(cfg.vocab_size, d, s, dt));
  }
  if (cfg.fourier_dim % 2 != 0) throw NumericError("fourier encoding: dimension must be even");
  for (auto [group, coords] : {std::pair<const char*, int64_t>{"pe.fourier.bbox", 4},
                               std::pair<const char*, int64_t>{"pe.fourier.dom", 3}}) {
    std::string prefix(group);
    RngStream s = init.child("init/" + prefix);
    params.add(prefix + ".B", gaussian_tensor({coords, cfg.fourier_dim / 2}, 1.0, s, dt));
    params.add(prefix + ".mlp.w1", init_linear(cfg.fourier_dim, d, s, dt));
    params.add(prefix + ".mlp.b1", Tensor::zeros({1, d}, dt));
    params.add(prefix + ".mlp.w2", init_linear(d, d, s, dt));
    params.add(prefix + ".mlp.b2", Tensor::zeros({1, d}, dt));
  }
}

}  // namespace vut
