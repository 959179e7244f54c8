#include "minivlm/vision_encoder.hpp"

#include "minivlm/errors.hpp"

namespace minivlm {

void EncoderConfig::validate() const {
  if (tile_px < 1) throw ConfigError("encoder.tile_px", "must be positive");
  if (patch_px < 1) throw ConfigError("encoder.patch_px", "must be positive");
  if (tile_px % patch_px != 0) throw ConfigError("encoder.patch_px", "must divide tile_px");
  if (d_v < 1) throw ConfigError("encoder.d_v", "must be positive");
  if (n_layers < 0) throw ConfigError("encoder.n_layers", "must be non-negative");
  if (n_heads < 1 || d_v % n_heads != 0) throw ConfigError("encoder.n_heads", "must divide d_v");
  if (mlp_ratio < 1) throw ConfigError("encoder.mlp_ratio", "must be positive");
}

BlockParams BlockParams::init(int dim, int mlp_ratio, Rng& rng) {
  BlockParams p;
  p.ln1 = LayerNormParams::init(dim);
  p.qkv.q = LinearParams::init(dim, dim, rng);
  p.qkv.k = LinearParams::init(dim, dim, rng);
  p.qkv.v = LinearParams::init(dim, dim, rng);
  p.attn_out = LinearParams::init(dim, dim, rng);
  p.ln2 = LayerNormParams::init(dim);
  p.ffn.fc1 = LinearParams::init(dim, dim * mlp_ratio, rng);
  p.ffn.fc2 = LinearParams::init(dim * mlp_ratio, dim, rng);
  return p;
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderParams p;
  p.patch_embed = LinearParams::init(cfg.patch_dim(), cfg.d_v, rng);
  p.pos_embed = Mat(cfg.tokens_per_view(), cfg.d_v);
  // Positional table has no fan-in; scale it like a d_v-wide projection.
  init_uniform_fan_in(p.pos_embed, cfg.d_v, rng);
  for (int i = 0; i < cfg.n_layers; ++i) p.layers.push_back(BlockParams::init(cfg.d_v, cfg.mlp_ratio, rng));
  p.final_norm = LayerNormParams::init(cfg.d_v);
  return p;
}

Mat patchify(const RasterImage& view, int patch_px) {
  const int gh = view.height() / patch_px;
  const int gw = view.width() / patch_px;
  if (gh * patch_px != view.height() || gw * patch_px != view.width()) {
    throw ContractError("patchify: view size must be a multiple of the patch size");
  }
  constexpr int ch = RasterImage::kChannels;
  Mat patches(static_cast<Eigen::Index>(gh) * gw, static_cast<Eigen::Index>(patch_px) * patch_px * ch);
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      double* dst = patches.row(static_cast<Eigen::Index>(py) * gw + px).data();
      for (int y = 0; y < patch_px; ++y) {
        const double* src = view.data_at(py * patch_px + y, px * patch_px);
        std::copy(src, src + patch_px * ch, dst + static_cast<std::ptrdiff_t>(y) * patch_px * ch);
      }
    }
  }
  return patches;
}

namespace {

BlockOptions encoder_block_options(const EncoderConfig& cfg) {
  BlockOptions opt;
  opt.n_heads = cfg.n_heads;
  opt.causal = false;
  return opt;
}

}  // namespace

TokenGrid encode_view(const RasterImage& view, const EncoderParams& params,
                      const EncoderConfig& cfg, EncoderCache* cache) {
  if (view.height() != cfg.tile_px || view.width() != cfg.tile_px) {
    throw ContractError("encode_view: view must be " + std::to_string(cfg.tile_px) + "x" +
                        std::to_string(cfg.tile_px));
  }
  Mat patches = patchify(view, cfg.patch_px);
  Mat x = linear(patches, params.patch_embed);
  x += params.pos_embed;
  const BlockOptions opt = encoder_block_options(cfg);
  if (cache != nullptr) cache->blocks.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    x = block_forward(x, params.layers[i].weights(), opt, cache ? &cache->blocks[i] : nullptr);
  }
  TokenGrid grid{cfg.grid_side(), cfg.grid_side(),
                 layer_norm(x, params.final_norm, cache ? &cache->final_norm : nullptr)};
  if (cache != nullptr) cache->patches = std::move(patches);
  return grid;
}

std::vector<TokenGrid> encode_views(const std::vector<RasterImage>& views,
                                    const EncoderParams& params, const EncoderConfig& cfg) {
  std::vector<TokenGrid> grids;
  grids.reserve(views.size());
  for (const auto& v : views) grids.push_back(encode_view(v, params, cfg));
  return grids;
}

void encode_view_backward(const Mat& d_features, const EncoderParams& params,
                          const EncoderConfig& cfg, const EncoderCache& cache,
                          EncoderParams& grad) {
  Mat dx = layer_norm_backward(d_features, params.final_norm, cache.final_norm, &grad.final_norm);
  const BlockOptions opt = encoder_block_options(cfg);
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    BlockParams& g = grad.layers[i];
    const BlockGrads bg{&g.ln1, &g.qkv, nullptr, &g.attn_out, &g.ln2, &g.ffn};
    dx = block_backward(dx, params.layers[i].weights(), opt, cache.blocks[i], bg);
  }
  grad.pos_embed += dx;
  linear_backward(cache.patches, params.patch_embed, dx, &grad.patch_embed);
}

}  // namespace minivlm
