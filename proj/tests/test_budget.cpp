#include "doctest.h"

#include "minivlm/budget.hpp"
#include "minivlm/errors.hpp"
#include "minivlm/merger.hpp"

using namespace minivlm;

namespace {

BudgetReport image(int h, int w, SplitStrategy s, int window = 2) {
  BudgetInput in;
  in.dims = ImageDims{h, w};
  in.strategy = s;
  in.window = window;
  return compute_budget(in);
}

}  // namespace

TEST_CASE("budget examples") {
  CHECK(image(672, 672, SplitStrategy::uniform4).views == 5);
  const BudgetReport r = image(336, 336, SplitStrategy::resize);
  CHECK(r.views == 1);
  CHECK(r.raw_tokens == 576);
  BudgetInput v;
  v.frames = 30;
  v.window = 2;
  const BudgetReport vid = compute_budget(v);
  CHECK(vid.naive_position_ids == 4320);
  CHECK(vid.shared_position_ids == 30);
  CHECK(vid.merged_tokens == 4320);
}

TEST_CASE("budget invariants") {
  for (auto s : {SplitStrategy::resize, SplitStrategy::uniform4, SplitStrategy::ds4, SplitStrategy::ds12}) {
    for (int w : {1, 2, 3, 5}) {
      BudgetInput in;
      in.dims = ImageDims{1000, 2500};
      in.strategy = s;
      in.window = w;
      in.text_tokens = 7;
      const BudgetReport r = compute_budget(in);
      CHECK(r.merged_tokens == r.views * merged_token_count(24, w));
      CHECK(r.raw_tokens == r.views * 576);
      CHECK(r.shared_position_ids == r.views + 7);
      CHECK(r.naive_position_ids == r.merged_tokens + 7);
    }
  }
  CHECK(image(1008, 1344, SplitStrategy::ds12).views == 13);
  CHECK(image(1008, 1344, SplitStrategy::ds4).views <= 5);
  CHECK(image(5000, 5000, SplitStrategy::uniform4).grid == GridShape{2, 2});
}

TEST_CASE("budget rejects inconsistent input") {
  BudgetInput none;
  CHECK_THROWS_AS(compute_budget(none), ContractError);
  BudgetInput both;
  both.dims = ImageDims{10, 10};
  both.frames = 3;
  CHECK_THROWS_AS(compute_budget(both), ContractError);
  BudgetInput bad_patch;
  bad_patch.frames = 2;
  bad_patch.patch = 13;
  CHECK_THROWS_AS(compute_budget(bad_patch), ContractError);
  CHECK(parse_split_strategy("ds12") == SplitStrategy::ds12);
  CHECK_FALSE(parse_split_strategy("ds13").has_value());
}
