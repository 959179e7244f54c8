#include "minivlm/glhr.hpp"

#include "minivlm/errors.hpp"

#include <cmath>
#include <limits>

namespace minivlm {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

void check_args(ImageDims dims, int tile) {
  if (!dims.valid()) throw ContractError("glhr: image dimensions must be positive");
  if (tile < 1) throw ContractError("glhr: tile must be >= 1");
}

}  // namespace

GridShape ceil_grid(ImageDims dims, int tile) {
  check_args(dims, tile);
  return GridShape{ceil_div(dims.h_px, tile), ceil_div(dims.w_px, tile)};
}

GridShape compute_grid(ImageDims dims, int tile, int max_patches) {
  if (max_patches < 1) throw ContractError("glhr: max_patches must be >= 1");
  const GridShape natural = ceil_grid(dims, tile);
  // Compare products in 64 bits: ceil grids of huge images can overflow int.
  if (static_cast<long long>(natural.p_h) * natural.p_w <= max_patches) return natural;

  const double target = std::log(static_cast<double>(dims.h_px) / dims.w_px);
  constexpr double kTieEps = 1e-12;
  GridShape best{1, 1};
  double best_err = std::numeric_limits<double>::infinity();
  for (int a = 1; a <= max_patches; ++a) {
    for (int b = 1; a * b <= max_patches; ++b) {
      const double err = std::abs(std::log(static_cast<double>(a) / b) - target);
      bool better = err < best_err - kTieEps;
      if (!better && std::abs(err - best_err) <= kTieEps) {
        const int area = a * b;
        better = area > best.count() || (area == best.count() && a > best.p_h);
      }
      if (better) {
        best = GridShape{a, b};
        best_err = err;
      }
    }
  }
  return best;
}

SplitPlan plan_with_grid(ImageDims dims, GridShape grid, int tile, bool include_global) {
  check_args(dims, tile);
  if (grid.p_h < 1 || grid.p_w < 1) throw ContractError("glhr: grid must be at least 1x1");
  SplitPlan plan;
  plan.source = dims;
  plan.grid = grid;
  plan.tile = tile;
  plan.resize_to = ImageDims{grid.p_h * tile, grid.p_w * tile};
  plan.include_global = include_global;
  plan.tiles.reserve(static_cast<std::size_t>(grid.count()));
  for (int r = 0; r < grid.p_h; ++r) {
    for (int c = 0; c < grid.p_w; ++c) plan.tiles.push_back(PixelBox{r * tile, c * tile, tile, tile});
  }
  return plan;
}

SplitPlan plan_split(ImageDims dims, int tile, int max_patches, bool include_global) {
  return plan_with_grid(dims, compute_grid(dims, tile, max_patches), tile, include_global);
}

std::vector<RasterImage> apply_split(const RasterImage& img, const SplitPlan& plan) {
  if (img.dims() != plan.source) {
    throw ContractError("apply_split: image dims do not match the plan's source dims");
  }
  std::vector<RasterImage> views;
  views.reserve(static_cast<std::size_t>(plan.view_count()));
  if (plan.include_global) views.push_back(resize_bilinear(img, ImageDims{plan.tile, plan.tile}));
  const RasterImage resized = resize_bilinear(img, plan.resize_to);
  for (const PixelBox& box : plan.tiles) views.push_back(crop(resized, box.y, box.x, box.h, box.w));
  return views;
}

}  // namespace minivlm
