#pragma once

#include "minivlm/image.hpp"
#include "minivlm/nn.hpp"
#include "minivlm/tensor.hpp"

#include <vector>

namespace minivlm {

struct EncoderConfig {
  int tile_px = 336;
  int patch_px = 14;
  int d_v = 64;
  int n_layers = 2;
  int n_heads = 4;
  int mlp_ratio = 4;

  int grid_side() const noexcept { return tile_px / patch_px; }
  int tokens_per_view() const noexcept { return grid_side() * grid_side(); }
  int patch_dim() const noexcept { return patch_px * patch_px * RasterImage::kChannels; }

  /// Throws ConfigError on the first invalid field.
  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// g_h x g_w grid of feature vectors stored row-major, one token per row.
struct TokenGrid {
  int g_h = 0;
  int g_w = 0;
  Mat features;

  Eigen::Index token_count() const noexcept { return features.rows(); }
  Eigen::Index dim() const noexcept { return features.cols(); }
};

/// Pre-norm transformer block weights (single QKV route).
struct BlockParams {
  LayerNormParams ln1;
  QkvParams qkv;
  LinearParams attn_out;
  LayerNormParams ln2;
  FfnParams ffn;

  static BlockParams init(int dim, int mlp_ratio, Rng& rng);
  BlockWeights weights() const { return BlockWeights{ln1, qkv, nullptr, attn_out, ln2, ffn}; }
};

struct EncoderParams {
  LinearParams patch_embed;  // (patch_dim, d_v)
  Mat pos_embed;             // (tokens_per_view, d_v)
  std::vector<BlockParams> layers;
  LayerNormParams final_norm;

  static EncoderParams init(const EncoderConfig& cfg, Rng& rng);
};

/// Cuts a tile_px view into row-major patches; each row holds one patch as
/// (patch_y, patch_x, channel) samples.
Mat patchify(const RasterImage& view, int patch_px);

struct EncoderCache {
  Mat patches;
  std::vector<BlockCache> blocks;
  LayerNormCache final_norm;
};

/// Encodes one tile_px x tile_px view. Throws ContractError for any other size.
TokenGrid encode_view(const RasterImage& view, const EncoderParams& params,
                      const EncoderConfig& cfg, EncoderCache* cache = nullptr);

std::vector<TokenGrid> encode_views(const std::vector<RasterImage>& views,
                                    const EncoderParams& params, const EncoderConfig& cfg);

/// Accumulates parameter gradients given d(loss)/d(features) of one view.
void encode_view_backward(const Mat& d_features, const EncoderParams& params,
                          const EncoderConfig& cfg, const EncoderCache& cache,
                          EncoderParams& grad);

}  // namespace minivlm
