#include "minivlm/merger.hpp"

#include "minivlm/errors.hpp"

#include <algorithm>

namespace minivlm {

namespace {

long long ceil_div(long long a, long long b) { return (a + b - 1) / b; }

void check_spec(const MergeSpec& spec) {
  if (spec.window < 1) throw ContractError("merge: window must be >= 1");
}

}  // namespace

long long merged_token_count(long long g, long long w) {
  if (g < 1 || w < 1) throw ContractError("merged_token_count: g and w must be >= 1");
  const long long side = ceil_div(g, w);
  return side * side;
}

TokenGrid merge(const TokenGrid& grid, const MergeSpec& spec) {
  check_spec(spec);
  if (grid.features.rows() != static_cast<Eigen::Index>(grid.g_h) * grid.g_w) {
    throw ContractError("merge: feature count does not match grid shape");
  }
  if (spec.window == 1) return grid;
  const int w = spec.window;
  const int oh = static_cast<int>(ceil_div(grid.g_h, w));
  const int ow = static_cast<int>(ceil_div(grid.g_w, w));
  TokenGrid out{oh, ow, Mat::Zero(static_cast<Eigen::Index>(oh) * ow, grid.dim())};
  for (int oy = 0; oy < oh; ++oy) {
    const int y1 = std::min(grid.g_h, (oy + 1) * w);
    for (int ox = 0; ox < ow; ++ox) {
      const int x1 = std::min(grid.g_w, (ox + 1) * w);
      // Running mean: a constant window reproduces its value exactly.
      auto mean = out.features.row(static_cast<Eigen::Index>(oy) * ow + ox);
      int k = 0;
      for (int y = oy * w; y < y1; ++y) {
        for (int x = ox * w; x < x1; ++x) {
          ++k;
          mean += (grid.features.row(static_cast<Eigen::Index>(y) * grid.g_w + x) - mean) / static_cast<double>(k);
        }
      }
    }
  }
  return out;
}

Mat merge_backward(const Mat& d_out, int g_h, int g_w, const MergeSpec& spec) {
  check_spec(spec);
  if (spec.window == 1) return d_out;
  const int w = spec.window;
  const int oh = static_cast<int>(ceil_div(g_h, w));
  const int ow = static_cast<int>(ceil_div(g_w, w));
  if (d_out.rows() != static_cast<Eigen::Index>(oh) * ow) {
    throw ContractError("merge_backward: gradient shape does not match merged grid");
  }
  Mat d_in(static_cast<Eigen::Index>(g_h) * g_w, d_out.cols());
  for (int y = 0; y < g_h; ++y) {
    const int oy = y / w;
    const int cells_y = std::min(g_h, (oy + 1) * w) - oy * w;
    for (int x = 0; x < g_w; ++x) {
      const int ox = x / w;
      const int cells_x = std::min(g_w, (ox + 1) * w) - ox * w;
      d_in.row(static_cast<Eigen::Index>(y) * g_w + x) =
          d_out.row(static_cast<Eigen::Index>(oy) * ow + ox) / static_cast<double>(cells_y * cells_x);
    }
  }
  return d_in;
}

}  // namespace minivlm
