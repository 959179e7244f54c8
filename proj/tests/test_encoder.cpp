#include "doctest.h"

#include "minivlm/errors.hpp"
#include "minivlm/glhr.hpp"
#include "minivlm/vision_encoder.hpp"

using namespace minivlm;

namespace {

RasterImage noise(ImageDims d, std::uint64_t seed) {
  Rng rng(seed);
  RasterImage img(d);
  for (double& p : img.pixels()) p = uniform01(rng);
  return img;
}

}  // namespace

TEST_CASE("encoder config defaults give a 24x24 grid") {
  EncoderConfig cfg;
  CHECK(cfg.grid_side() == 24);
  CHECK(cfg.tokens_per_view() == 576);
  EncoderConfig bad;
  bad.patch_px = 13;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = EncoderConfig{};
  bad.n_heads = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encode_view yields 576 tokens and is deterministic") {
  EncoderConfig cfg;
  Rng rng(1);
  const EncoderParams params = EncoderParams::init(cfg, rng);
  const RasterImage view = noise({336, 336}, 3);
  const TokenGrid a = encode_view(view, params, cfg);
  CHECK(a.g_h == 24);
  CHECK(a.g_w == 24);
  CHECK(a.token_count() == 576);
  CHECK(a.dim() == cfg.d_v);
  CHECK(a.features.allFinite());
  Rng rng2(1);
  const EncoderParams again = EncoderParams::init(cfg, rng2);
  CHECK(encode_view(view, again, cfg).features == a.features);
  CHECK_THROWS_AS(encode_view(noise({336, 335}, 1), params, cfg), ContractError);
}

TEST_CASE("zero image with zero bias and zero positions gives identical tokens") {
  EncoderConfig cfg;
  Rng rng(2);
  EncoderParams params = EncoderParams::init(cfg, rng);
  params.patch_embed.b.setZero();
  params.pos_embed.setZero();
  const TokenGrid g = encode_view(RasterImage({336, 336}), params, cfg);
  for (Eigen::Index t = 1; t < g.token_count(); ++t) REQUIRE(g.features.row(t) == g.features.row(0));
}

TEST_CASE("encode_views preserves order and counts") {
  EncoderConfig cfg;
  Rng rng(4);
  const EncoderParams params = EncoderParams::init(cfg, rng);
  CHECK(encode_views({}, params, cfg).empty());
  RasterImage img = noise({672, 672}, 5);
  const auto views = apply_split(img, plan_split(img.dims()));
  const auto grids = encode_views(views, params, cfg);
  REQUIRE(grids.size() == 5);
  Eigen::Index raw = 0;
  for (const auto& g : grids) raw += g.token_count();
  CHECK(raw == 2880);
  CHECK(grids[3].features == encode_view(views[3], params, cfg).features);
  CHECK(13 * cfg.tokens_per_view() == 7488);
}

TEST_CASE("translating by one patch permutes the patch embeddings") {
  EncoderConfig cfg;
  Rng rng(6);
  const EncoderParams params = EncoderParams::init(cfg, rng);
  const RasterImage img = noise({336, 336}, 8);
  RasterImage shifted({336, 336});
  for (int y = 0; y < 336; ++y)
    for (int x = 0; x + 14 < 336; ++x)
      for (int c = 0; c < 3; ++c) shifted.at(y, x + 14, c) = img.at(y, x, c);
  const Mat e0 = linear(patchify(img, 14), params.patch_embed);
  const Mat e1 = linear(patchify(shifted, 14), params.patch_embed);
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c + 1 < 24; ++c) REQUIRE(e1.row(r * 24 + c + 1) == e0.row(r * 24 + c));
}
