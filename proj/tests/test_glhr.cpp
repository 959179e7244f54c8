#include "doctest.h"

#include "minivlm/errors.hpp"
#include "minivlm/glhr.hpp"
#include "minivlm/tensor.hpp"

#include <cmath>

using namespace minivlm;

namespace {

// Independent brute force of the capping rule.
GridShape brute_force_cap(ImageDims d, int max_patches) {
  const double target = std::log(static_cast<double>(d.h_px) / d.w_px);
  GridShape best{1, 1};
  double best_err = INFINITY;
  for (int a = 1; a <= max_patches; ++a) {
    for (int b = 1; a * b <= max_patches; ++b) {
      const double err = std::abs(std::log(static_cast<double>(a) / b) - target);
      const bool better = err < best_err - 1e-12 ||
                          (std::abs(err - best_err) <= 1e-12 &&
                           (a * b > best.count() || (a * b == best.count() && a > best.p_h)));
      if (better) {
        best = {a, b};
        best_err = err;
      }
    }
  }
  return best;
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

TEST_CASE("compute_grid examples") {
  CHECK(compute_grid({336, 336}) == GridShape{1, 1});
  CHECK(compute_grid({672, 672}) == GridShape{2, 2});
  CHECK(plan_split({672, 672}).view_count() == 5);
  CHECK(compute_grid({1008, 1344}) == GridShape{3, 4});
  CHECK(plan_split({1008, 1344}).view_count() == 13);
  CHECK(compute_grid({5000, 400}) == brute_force_cap({5000, 400}, 12));
  CHECK(compute_grid({5000, 400}) == GridShape{12, 1});
}

TEST_CASE("700x700 keeps its ceiling grid because 9 tiles fit under the cap") {
  const SplitPlan plan = plan_split({700, 700});
  CHECK(plan.grid == GridShape{3, 3});
  CHECK(plan.resize_to == ImageDims{1008, 1008});
}

TEST_CASE("672x672 plan lists the four local boxes row-major") {
  const SplitPlan plan = plan_split({672, 672});
  REQUIRE(plan.tiles.size() == 4);
  CHECK(plan.tiles[0] == PixelBox{0, 0, 336, 336});
  CHECK(plan.tiles[1] == PixelBox{0, 336, 336, 336});
  CHECK(plan.tiles[2] == PixelBox{336, 0, 336, 336});
  CHECK(plan.tiles[3] == PixelBox{336, 336, 336, 336});
  CHECK(plan.include_global);
}

TEST_CASE("grid properties over random dims") {
  Rng rng(42);
  for (int i = 0; i < 5000; ++i) {
    const ImageDims d{1 + static_cast<int>(uniform_index(rng, 4000)), 1 + static_cast<int>(uniform_index(rng, 4000))};
    const GridShape g = compute_grid(d);
    const GridShape c = ceil_grid(d);
    REQUIRE(c == GridShape{ceil_div(d.h_px, 336), ceil_div(d.w_px, 336)});
    if (c.count() <= 12) {
      REQUIRE(g == c);
    } else {
      REQUIRE(g == brute_force_cap(d, 12));
    }
    REQUIRE(g.count() >= 1);
    REQUIRE(g.count() <= 12);
    const SplitPlan plan = plan_split(d);
    REQUIRE(plan.view_count() >= 2);
    REQUIRE(plan.view_count() <= 13);
    REQUIRE(plan == plan_split(d));
    // Enlarging never shrinks the pre-cap grid.
    REQUIRE(ceil_grid({d.h_px + 37, d.w_px + 1}).count() >= c.count());
  }
}

TEST_CASE("apply_split of a constant image gives constant views") {
  RasterImage img({500, 900});
  const double rgb[3] = {0.25, 0.5, 0.75};
  img.fill_rect(0, 0, 500, 900, rgb);
  const SplitPlan plan = plan_split(img.dims());
  const auto views = apply_split(img, plan);
  REQUIRE(views.size() == static_cast<std::size_t>(plan.grid.count() + 1));
  for (const auto& v : views) {
    REQUIRE(v.dims() == ImageDims{336, 336});
    for (int y = 0; y < 336; y += 17)
      for (int x = 0; x < 336; x += 13)
        for (int c = 0; c < 3; ++c) REQUIRE(v.at(y, x, c) == rgb[c]);
  }
}

TEST_CASE("quadrant image splits into uniform quadrant views") {
  RasterImage img({672, 672});
  const double colors[4][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}};
  for (int q = 0; q < 4; ++q) img.fill_rect((q / 2) * 336, (q % 2) * 336, 336, 336, colors[q]);
  const auto views = apply_split(img, plan_split(img.dims()));
  REQUIRE(views.size() == 5);
  for (int q = 0; q < 4; ++q) {
    const auto& v = views[static_cast<std::size_t>(q) + 1];
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (int y = 0; y < 336; ++y)
        for (int x = 0; x < 336; ++x) mean += v.at(y, x, c);
      CHECK(mean / (336.0 * 336.0) == colors[q][c]);
    }
  }
}

TEST_CASE("local tiles reassemble the resized image bit-exactly") {
  Rng rng(7);
  RasterImage img({400, 950});
  for (double& p : img.pixels()) p = uniform01(rng);
  const SplitPlan plan = plan_split(img.dims());
  const auto views = apply_split(img, plan);
  const RasterImage resized = resize_bilinear(img, plan.resize_to);
  CHECK(views.front() == resize_bilinear(img, {336, 336}));
  for (std::size_t t = 0; t < plan.tiles.size(); ++t) {
    const PixelBox& b = plan.tiles[t];
    const RasterImage& v = views[t + 1];
    for (int y = 0; y < b.h; ++y)
      for (int x = 0; x < b.w; ++x)
        for (int c = 0; c < 3; ++c) REQUIRE(v.at(y, x, c) == resized.at(b.y + y, b.x + x, c));
  }
}

TEST_CASE("apply_split rejects an image that does not match the plan") {
  RasterImage img({336, 336});
  CHECK_THROWS_AS(apply_split(img, plan_split({672, 672})), ContractError);
}
