#pragma once

// Position-id assignment for mixed text / visual sequences.
//
// naive:       every token consumes a fresh id.
// shared_fpid: each text token consumes a fresh id; every visual frame (one
//              video frame, or one view of a split image) consumes exactly
//              one id shared by all of its tokens.
// Ids start at 0 and increase by one per consumption, so they are dense.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace minivlm {

enum class TokenType : std::uint8_t { text = 0, visual = 1 };

enum class SegmentKind : std::uint8_t { text, visual_frame };

enum class PositionMode { naive, shared_fpid };

std::string_view to_string(PositionMode mode);
std::optional<PositionMode> parse_position_mode(std::string_view s);

struct Segment {
  SegmentKind kind = SegmentKind::text;
  std::int64_t token_count = 0;
};

struct SequenceLayout {
  std::vector<Segment> entries;
  std::vector<TokenType> token_types;       // filled by make_layout
  std::vector<std::int64_t> position_ids;   // filled by assign_positions

  std::int64_t total_tokens() const noexcept;
  bool has_positions() const noexcept {
    return static_cast<std::int64_t>(position_ids.size()) == total_tokens();
  }
};

/// Builds a layout with token types filled in. Throws ContractError when
/// `entries` is empty or any segment has token_count < 1.
SequenceLayout make_layout(std::vector<Segment> entries);

/// Returns a copy of `layout` with position ids (re)assigned under `mode`.
SequenceLayout assign_positions(const SequenceLayout& layout, PositionMode mode);

/// Number of distinct ids assign_positions consumes (max id + 1).
std::int64_t count_positions(const SequenceLayout& layout, PositionMode mode);

/// Layout of `frames` visual frames of `tokens_per_frame` tokens each, with
/// no text.
SequenceLayout video_layout(std::int64_t frames, std::int64_t tokens_per_frame);

}  // namespace minivlm
