#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vut/tensor.hpp"

namespace vut {

// Dimensions and rates for the full model. Defaults follow the published
// configuration (256-d, 8 heads, 2048 MLP, 6+6 layers); tests and desk-scale
// training shrink them through the run config.
struct ModelConfig {
  // Input geometry.
  int raster_h = 256;
  int raster_w = 256;
  int n_queries = 32;  // node slots N (matches the corpus node budget)
  int vocab_size = 4;
  int n_types = 13;  // detector emits n_types + 1 classes (PADDING last)

  // Image embedder: stride-2 conv blocks; the projection maps the last
  // channel count to d_model.
  std::vector<int> backbone_channels = {32, 64, 128, 256};
  int group_norm_groups = 8;

  // Positional encodings.
  int fourier_dim = 64;  // F per positional group (bbox / DOM)

  // Focus maps.
  double focus_beta = 2.0;
  double focus_tau = -1.0;

  // Encoder.
  int enc_layers = 6;
  int heads = 8;
  int d_model = 256;
  int mlp_dim = 2048;
  int qkv_dim = 256;
  double attn_dropout = 0.10;
  double mlp_dropout = 0.10;

  // Decoder.
  int dec_layers = 6;
  int dec_heads = 8;
  int dec_mlp_dim = 2048;
  int dec_qkv_dim = 256;
  double dec_dropout = 0.10;
  double cross_attn_dropout = 0.10;  // 0.20 in five-task training
  double enc_dropout_before_cross = 0.10;
  int max_len = 30;

  DType dtype = DType::F32;

  int backbone_stride() const { return 1 << int(backbone_channels.size()); }
  int grid_h() const { return raster_h / backbone_stride(); }
  int grid_w() const { return raster_w / backbone_stride(); }
  int m_tokens() const { return grid_h() * grid_w(); }  // M
  int n_classes() const { return n_types + 1; }
};

}  // namespace vut
