#pragma once

// Token and position-id accounting for one media input, combining the split
// plan, the encoder token grid, the merger and both position-id schemes.
// Needs no model parameters.

#include "minivlm/glhr.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace minivlm {

/// resize:   one view, the image resized to a single tile (no global view).
/// uniform4: a fixed 2x2 grid plus the global view.
/// ds4/ds12: dynamic grid capped at 4 / 12 tiles plus the global view.
enum class SplitStrategy { resize, uniform4, ds4, ds12 };

std::string_view to_string(SplitStrategy s);
std::optional<SplitStrategy> parse_split_strategy(std::string_view s);

struct BudgetInput {
  std::optional<ImageDims> dims;  // image input
  std::optional<int> frames;      // video input (one tile view per frame)
  SplitStrategy strategy = SplitStrategy::ds12;
  int tile = kDefaultTile;
  int patch = 14;
  /// Overrides the cap of the ds strategies when set.
  std::optional<int> max_patches;
  int window = 2;
  int text_tokens = 0;
};

struct BudgetReport {
  BudgetInput input;
  GridShape grid;            // (1, 1) for resize and for video frames
  long long views = 0;
  long long tokens_per_view = 0;
  long long merged_tokens_per_view = 0;
  long long raw_tokens = 0;
  long long merged_tokens = 0;
  long long naive_position_ids = 0;
  long long shared_position_ids = 0;
};

/// Throws ContractError for inconsistent input (both or neither of dims and
/// frames, non-positive sizes, a patch that does not divide the tile).
BudgetReport compute_budget(const BudgetInput& in);

nlohmann::json to_json(const BudgetReport& r);

}  // namespace minivlm
