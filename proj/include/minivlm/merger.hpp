#pragma once

// Visual merger: mean pooling of a token grid over w x w spatial windows.

#include "minivlm/vision_encoder.hpp"

namespace minivlm {

enum class MergeOp { mean };

struct MergeSpec {
  int window = 1;
  MergeOp op = MergeOp::mean;
};

/// ceil(g / w)^2: tokens left after merging a g x g grid.
long long merged_token_count(long long g, long long w);

/// Output grid is (ceil(g_h / w), ceil(g_w / w)). Edge windows that run past
/// the grid are clipped and averaged over the cells they actually cover.
/// window == 1 returns an exact copy.
TokenGrid merge(const TokenGrid& grid, const MergeSpec& spec);

/// Gradient of merge with respect to its input grid features.
Mat merge_backward(const Mat& d_out, int g_h, int g_w, const MergeSpec& spec);

}  // namespace minivlm
