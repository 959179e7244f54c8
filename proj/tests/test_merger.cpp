#include "doctest.h"

#include "minivlm/merger.hpp"

using namespace minivlm;

namespace {

TokenGrid random_grid(int gh, int gw, int d, std::uint64_t seed) {
  Rng rng(seed);
  TokenGrid g{gh, gw, Mat(gh * gw, d)};
  for (Eigen::Index i = 0; i < g.features.size(); ++i) g.features.data()[i] = uniform(rng, -1, 1);
  return g;
}

}  // namespace

TEST_CASE("merged_token_count") {
  CHECK(merged_token_count(24, 1) == 576);
  CHECK(merged_token_count(24, 2) == 144);
  CHECK(merged_token_count(24, 3) == 64);
  CHECK(merged_token_count(24, 4) == 36);
  CHECK(merged_token_count(24, 6) == 16);
  CHECK(merged_token_count(24, 8) == 9);
  CHECK(merged_token_count(5, 2) == 9);
}

TEST_CASE("window 1 is the identity") {
  const TokenGrid g = random_grid(24, 24, 8, 1);
  const TokenGrid m = merge(g, {1});
  CHECK(m.g_h == 24);
  CHECK(m.features == g.features);
}

TEST_CASE("window 3 on 24x24 gives 8x8") {
  const TokenGrid m = merge(random_grid(24, 24, 4, 2), {3});
  CHECK(m.g_h == 8);
  CHECK(m.g_w == 8);
  CHECK(m.token_count() == 64);
}

TEST_CASE("5x5 grid with window 2 clips edge windows") {
  TokenGrid g{5, 5, Mat(25, 1)};
  for (int i = 0; i < 25; ++i) g.features(i, 0) = i;  // value = 5 * row + col
  const TokenGrid m = merge(g, {2});
  REQUIRE(m.g_h == 3);
  REQUIRE(m.g_w == 3);
  CHECK(m.features(0, 0) == (0 + 1 + 5 + 6) / 4.0);
  CHECK(m.features(2, 0) == (4 + 9) / 2.0);             // (0, 2): column 4, rows 0-1
  CHECK(m.features(6, 0) == (20 + 21) / 2.0);           // (2, 0): row 4, columns 0-1
  CHECK(m.features(8, 0) == 24.0);                      // (2, 2): the single cell (4, 4)
  CHECK(m.features(4, 0) == (12 + 13 + 17 + 18) / 4.0);
}

TEST_CASE("constant grids stay constant for any window") {
  for (int w = 1; w <= 9; ++w) {
    TokenGrid g{7, 11, Mat::Constant(77, 3, 0.3)};
    const TokenGrid m = merge(g, {w});
    CHECK((m.features.array() == 0.3).all());
  }
}

TEST_CASE("merge commutes with channel-linear maps") {
  const TokenGrid g = random_grid(24, 24, 6, 3);
  Rng rng(9);
  Mat a(6, 5);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = uniform(rng, -2, 2);
  for (int w : {2, 3, 5, 7}) {
    const Mat lhs = merge(TokenGrid{24, 24, g.features * a}, {w}).features;
    const Mat rhs = merge(g, {w}).features * a;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("divisible windows preserve the global mean") {
  const TokenGrid g = random_grid(24, 24, 4, 4);
  for (int w : {1, 2, 3, 4, 6, 8}) {
    const Mat in_mean = g.features.colwise().mean();
    const Mat out_mean = merge(g, {w}).features.colwise().mean();
    CHECK((in_mean - out_mean).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("merge_backward is the adjoint of merge") {
  const TokenGrid g = random_grid(5, 7, 3, 5);
  const TokenGrid m = merge(g, {3});
  const TokenGrid probe = random_grid(m.g_h, m.g_w, 3, 6);
  const Mat back = merge_backward(probe.features, 5, 7, {3});
  const double lhs = (m.features.array() * probe.features.array()).sum();
  const double rhs = (g.features.array() * back.array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
