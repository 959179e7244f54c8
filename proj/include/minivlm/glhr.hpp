#pragma once

// Global-local high resolution splitting: an image becomes one downsized
// global view plus a row-major grid of tile x tile local crops taken from a
// copy resized to an exact multiple of the tile.

#include "minivlm/image.hpp"

#include <vector>

namespace minivlm {

inline constexpr int kDefaultTile = 336;
inline constexpr int kDefaultMaxPatches = 12;

struct GridShape {
  int p_h = 1;  // tile rows
  int p_w = 1;  // tile columns

  int count() const noexcept { return p_h * p_w; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

struct PixelBox {
  int y = 0;
  int x = 0;
  int h = 0;
  int w = 0;
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct SplitPlan {
  ImageDims source;      // dims the plan was computed for
  ImageDims resize_to;   // grid.p_h * tile by grid.p_w * tile
  GridShape grid;
  int tile = kDefaultTile;
  std::vector<PixelBox> tiles;  // local tiles only, row-major
  bool include_global = true;

  int view_count() const noexcept { return grid.count() + (include_global ? 1 : 0); }
  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Uncapped grid (ceil(h / tile), ceil(w / tile)).
GridShape ceil_grid(ImageDims dims, int tile = kDefaultTile);

/// Tile grid for `dims`. When the ceiling grid holds more than `max_patches`
/// tiles, picks among all (a, b) with a * b <= max_patches the one minimizing
/// |log(a / b) - log(h / w)|, breaking ties by larger a * b, then larger a.
GridShape compute_grid(ImageDims dims, int tile = kDefaultTile,
                       int max_patches = kDefaultMaxPatches);

/// Plan with a caller-chosen grid (used by the fixed-grid budget strategies).
SplitPlan plan_with_grid(ImageDims dims, GridShape grid, int tile = kDefaultTile,
                         bool include_global = true);

SplitPlan plan_split(ImageDims dims, int tile = kDefaultTile,
                     int max_patches = kDefaultMaxPatches, bool include_global = true);

/// Views in order: global (when requested), then local tiles row-major.
/// Throws ContractError when `img` does not have the dims the plan was built for.
std::vector<RasterImage> apply_split(const RasterImage& img, const SplitPlan& plan);

}  // namespace minivlm
