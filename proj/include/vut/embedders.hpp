#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vut/model_config.hpp"
#include "vut/param_store.hpp"
#include "vut/tokenizer.hpp"
#include "vut/view.hpp"

namespace vut {

// Per-node discrete/continuous attributes ready for embedding.
struct NodeFeatures {
  std::vector<int> type_ids;
  std::vector<int> clickable;                  // 0/1
  std::vector<std::vector<int>> text_tokens;   // possibly empty per node
  std::vector<std::array<double, 4>> boxes;    // [top,left,right,bottom]
  std::vector<std::array<double, 3>> dom;      // [pre, post, depth]
  int count() const { return int(type_ids.size()); }
};

NodeFeatures node_features(const Screen& screen, const Vocabulary& vocab);

struct FusedInput {
  Var c;  // [(M+N) x D] content
  Var p;  // [(M+N) x D] positional (modal embeddings included)
  int m = 0;
  std::vector<bool> valid;  // per row; image rows always true
};

// Conv backbone + dense projection: [H,W,3] raster (values in [0,1]) to
// [M x D] content rows in grid row-major order.
Var image_content(GraphContext& ctx, const ModelConfig& cfg, const Tensor& raster);

// Fixed 2-D sinusoidal positional encoding over the feature grid (standard
// detection-transformer convention), [M x D].
Tensor image_positional(const ModelConfig& cfg);

// Node content: E_type + E_click + maxpool(E_tok(text)); [N x D] with zero
// rows past the node count. ABSENT hierarchy = empty features.
Var hierarchy_content(GraphContext& ctx, const ModelConfig& cfg, const NodeFeatures& nodes);

// Learnable-Fourier positional encoding of bbox + DOM groups for present
// hierarchies; the learned per-index query table when absent.
Var hierarchy_positional(GraphContext& ctx, const ModelConfig& cfg, const NodeFeatures& nodes,
                         bool absent);

// Multiplicative focus priors over valid positions; padded entries are 0.
// No target (or beta == tau) short-circuits to exact all-ones.
struct FocusMaps {
  Tensor alpha_s;  // [M]
  Tensor alpha_v;  // [N]
};
FocusMaps focus_maps(const ModelConfig& cfg, const std::optional<Box>& t_bbx,
                     const std::optional<int>& t_idx, int n_valid_nodes);

Var apply_focus(const Var& content, const Tensor& alpha);

// Concatenates modulated content and modal-offset positional streams.
FusedInput fuse(GraphContext& ctx, const ModelConfig& cfg, const Var& c_s, const Tensor& p_s,
                const Var& c_v, const Var& p_v, int n_valid_nodes);

// Registration is split along task needs: every task sees the image stream,
// only detection uses the learned query slots, and only hierarchy-present
// tasks embed node attributes.
void register_image_embedder_params(ParamStore& params, const ModelConfig& cfg,
                                    const RngStream& init);
void register_query_slot_params(ParamStore& params, const ModelConfig& cfg,
                                const RngStream& init);
void register_hierarchy_embedder_params(ParamStore& params, const ModelConfig& cfg,
                                        const RngStream& init);

}  // namespace vut
