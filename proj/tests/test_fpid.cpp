#include "doctest.h"

#include "minivlm/errors.hpp"
#include "minivlm/fpid.hpp"
#include "minivlm/tensor.hpp"

#include <set>

using namespace minivlm;

TEST_CASE("video position counts") {
  const SequenceLayout v = video_layout(30, 144);
  CHECK(v.total_tokens() == 4320);
  CHECK(count_positions(v, PositionMode::naive) == 4320);
  CHECK(count_positions(v, PositionMode::shared_fpid) == 30);
  const auto ids = assign_positions(v, PositionMode::naive).position_ids;
  CHECK(std::set<std::int64_t>(ids.begin(), ids.end()).size() == 4320);
}

TEST_CASE("single-image split range") {
  for (int views = 2; views <= 13; ++views) {
    const SequenceLayout l = video_layout(views, 144);
    CHECK(count_positions(l, PositionMode::naive) == 144 * views);
    CHECK(count_positions(l, PositionMode::shared_fpid) == views);
  }
  CHECK(count_positions(video_layout(2, 144), PositionMode::naive) == 288);
  CHECK(count_positions(video_layout(13, 144), PositionMode::naive) == 1872);
}

TEST_CASE("mixed layout ids") {
  const SequenceLayout l = make_layout({{SegmentKind::text, 3}, {SegmentKind::visual_frame, 2}, {SegmentKind::text, 1}});
  CHECK(assign_positions(l, PositionMode::shared_fpid).position_ids == std::vector<std::int64_t>{0, 1, 2, 3, 3, 4});
  CHECK(assign_positions(l, PositionMode::naive).position_ids == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5});
  CHECK(l.token_types == std::vector<TokenType>{TokenType::text, TokenType::text, TokenType::text,
                                                TokenType::visual, TokenType::visual, TokenType::text});
}

TEST_CASE("text-only layouts count one id per token in both modes") {
  const SequenceLayout l = make_layout({{SegmentKind::text, 17}});
  CHECK(count_positions(l, PositionMode::naive) == 17);
  CHECK(count_positions(l, PositionMode::shared_fpid) == 17);
}

TEST_CASE("layout contract errors") {
  CHECK_THROWS_AS(make_layout({}), ContractError);
  CHECK_THROWS_AS(make_layout({{SegmentKind::text, 0}}), ContractError);
  CHECK(parse_position_mode("shared_fpid") == PositionMode::shared_fpid);
  CHECK(parse_position_mode("naive") == PositionMode::naive);
  CHECK_FALSE(parse_position_mode("shared").has_value());
}

TEST_CASE("position id invariants over random layouts") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Segment> segs;
    const int n = 1 + static_cast<int>(uniform_index(rng, 8));
    bool all_frames_single = true;
    for (int i = 0; i < n; ++i) {
      const bool visual = uniform_index(rng, 2) == 1;
      const auto count = static_cast<std::int64_t>(1 + uniform_index(rng, visual ? 6 : 4));
      if (visual && count > 1) all_frames_single = false;
      segs.push_back({visual ? SegmentKind::visual_frame : SegmentKind::text, count});
    }
    const SequenceLayout l = make_layout(segs);
    const SequenceLayout shared = assign_positions(l, PositionMode::shared_fpid);
    const SequenceLayout naive = assign_positions(l, PositionMode::naive);
    REQUIRE(shared.has_positions());
    const auto cs = count_positions(l, PositionMode::shared_fpid);
    const auto cn = count_positions(l, PositionMode::naive);
    REQUIRE(cs <= cn);
    REQUIRE((cs == cn) == all_frames_single);
    for (const SequenceLayout* s : {&shared, &naive}) {
      const auto& ids = s->position_ids;
      REQUIRE(ids.front() == 0);
      std::int64_t last_text = -1;
      for (std::size_t t = 0; t < ids.size(); ++t) {
        if (t > 0) REQUIRE((ids[t] == ids[t - 1] || ids[t] == ids[t - 1] + 1));  // dense, nondecreasing
        if (s->token_types[t] == TokenType::text) {
          REQUIRE(ids[t] > last_text);
          last_text = ids[t];
        }
      }
      REQUIRE(ids.back() + 1 == (s == &shared ? cs : cn));
    }
    // Tokens of one frame share an id under shared_fpid.
    std::size_t t = 0;
    for (const Segment& seg : segs) {
      if (seg.kind == SegmentKind::visual_frame) {
        for (std::int64_t k = 1; k < seg.token_count; ++k) REQUIRE(shared.position_ids[t + k] == shared.position_ids[t]);
      }
      t += static_cast<std::size_t>(seg.token_count);
    }
    REQUIRE(assign_positions(shared, PositionMode::shared_fpid).position_ids == shared.position_ids);
  }
}
