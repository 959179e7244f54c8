#include "minivlm/fpid.hpp"

#include "minivlm/errors.hpp"

namespace minivlm {

std::string_view to_string(PositionMode mode) {
  return mode == PositionMode::naive ? "naive" : "shared_fpid";
}

std::optional<PositionMode> parse_position_mode(std::string_view s) {
  if (s == "naive") return PositionMode::naive;
  if (s == "shared_fpid") return PositionMode::shared_fpid;
  return std::nullopt;
}

std::int64_t SequenceLayout::total_tokens() const noexcept {
  std::int64_t n = 0;
  for (const auto& s : entries) n += s.token_count;
  return n;
}

namespace {

void check_entries(const std::vector<Segment>& entries) {
  if (entries.empty()) throw ContractError("layout: at least one segment is required");
  for (const auto& s : entries) {
    if (s.token_count < 1) throw ContractError("layout: segment token_count must be >= 1");
  }
}

}  // namespace

SequenceLayout make_layout(std::vector<Segment> entries) {
  check_entries(entries);
  SequenceLayout layout;
  layout.entries = std::move(entries);
  layout.token_types.reserve(static_cast<std::size_t>(layout.total_tokens()));
  for (const auto& s : layout.entries) {
    const TokenType t = s.kind == SegmentKind::text ? TokenType::text : TokenType::visual;
    layout.token_types.insert(layout.token_types.end(), static_cast<std::size_t>(s.token_count), t);
  }
  return layout;
}

SequenceLayout assign_positions(const SequenceLayout& layout, PositionMode mode) {
  check_entries(layout.entries);
  SequenceLayout out = layout;
  if (static_cast<std::int64_t>(out.token_types.size()) != out.total_tokens()) {
    out = make_layout(layout.entries);
  }
  out.position_ids.clear();
  out.position_ids.reserve(static_cast<std::size_t>(out.total_tokens()));
  std::int64_t next = 0;
  for (const auto& s : out.entries) {
    if (mode == PositionMode::shared_fpid && s.kind == SegmentKind::visual_frame) {
      out.position_ids.insert(out.position_ids.end(), static_cast<std::size_t>(s.token_count), next);
      ++next;
    } else {
      for (std::int64_t i = 0; i < s.token_count; ++i) out.position_ids.push_back(next++);
    }
  }
  return out;
}

std::int64_t count_positions(const SequenceLayout& layout, PositionMode mode) {
  check_entries(layout.entries);
  std::int64_t n = 0;
  for (const auto& s : layout.entries) {
    n += (mode == PositionMode::shared_fpid && s.kind == SegmentKind::visual_frame) ? 1 : s.token_count;
  }
  return n;
}

SequenceLayout video_layout(std::int64_t frames, std::int64_t tokens_per_frame) {
  return make_layout(std::vector<Segment>(static_cast<std::size_t>(frames),
                                          Segment{SegmentKind::visual_frame, tokens_per_frame}));
}

}  // namespace minivlm
