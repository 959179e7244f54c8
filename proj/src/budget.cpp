#include "minivlm/budget.hpp"

#include "minivlm/errors.hpp"
#include "minivlm/fpid.hpp"
#include "minivlm/merger.hpp"

namespace minivlm {

std::string_view to_string(SplitStrategy s) {
  switch (s) {
    case SplitStrategy::resize: return "resize";
    case SplitStrategy::uniform4: return "uniform4";
    case SplitStrategy::ds4: return "ds4";
    case SplitStrategy::ds12: return "ds12";
  }
  return "unknown";
}

std::optional<SplitStrategy> parse_split_strategy(std::string_view s) {
  for (auto v : {SplitStrategy::resize, SplitStrategy::uniform4, SplitStrategy::ds4, SplitStrategy::ds12}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

BudgetReport compute_budget(const BudgetInput& in) {
  if (in.dims.has_value() == in.frames.has_value()) {
    throw ContractError("budget: give exactly one of image dims or a frame count");
  }
  if (in.tile < 1 || in.patch < 1 || in.tile % in.patch != 0) {
    throw ContractError("budget: patch must divide tile");
  }
  if (in.window < 1) throw ContractError("budget: window must be >= 1");
  if (in.text_tokens < 0) throw ContractError("budget: text_tokens must be >= 0");
  if (in.max_patches && *in.max_patches < 1) throw ContractError("budget: max_patches must be >= 1");

  BudgetReport r;
  r.input = in;
  if (in.frames) {
    if (*in.frames < 1) throw ContractError("budget: frames must be >= 1");
    r.views = *in.frames;
  } else {
    const ImageDims dims = *in.dims;
    if (!dims.valid()) throw ContractError("budget: image dims must be positive");
    switch (in.strategy) {
      case SplitStrategy::resize:
        r.grid = GridShape{1, 1};
        r.views = 1;
        break;
      case SplitStrategy::uniform4:
        r.views = plan_with_grid(dims, GridShape{2, 2}, in.tile, true).view_count();
        r.grid = GridShape{2, 2};
        break;
      case SplitStrategy::ds4:
      case SplitStrategy::ds12: {
        const int cap = in.max_patches.value_or(in.strategy == SplitStrategy::ds4 ? 4 : 12);
        const SplitPlan plan = plan_split(dims, in.tile, cap, true);
        r.grid = plan.grid;
        r.views = plan.view_count();
        break;
      }
    }
  }
  const long long side = in.tile / in.patch;
  r.tokens_per_view = side * side;
  r.merged_tokens_per_view = merged_token_count(side, in.window);
  r.raw_tokens = r.views * r.tokens_per_view;
  r.merged_tokens = r.views * r.merged_tokens_per_view;

  std::vector<Segment> segments;
  if (in.text_tokens > 0) segments.push_back({SegmentKind::text, in.text_tokens});
  for (long long v = 0; v < r.views; ++v) segments.push_back({SegmentKind::visual_frame, r.merged_tokens_per_view});
  const SequenceLayout layout = make_layout(std::move(segments));
  r.naive_position_ids = count_positions(layout, PositionMode::naive);
  r.shared_position_ids = count_positions(layout, PositionMode::shared_fpid);
  return r;
}

nlohmann::json to_json(const BudgetReport& r) {
  nlohmann::json input;
  if (r.input.dims) {
    input = {{"kind", "image"}, {"h_px", r.input.dims->h_px}, {"w_px", r.input.dims->w_px}};
  } else {
    input = {{"kind", "video"}, {"frames", *r.input.frames}};
  }
  return nlohmann::json{{"input", input},
                        {"strategy", std::string(to_string(r.input.strategy))},
                        {"tile", r.input.tile},
                        {"patch", r.input.patch},
                        {"window", r.input.window},
                        {"text_tokens", r.input.text_tokens},
                        {"grid", {r.grid.p_h, r.grid.p_w}},
                        {"views", r.views},
                        {"tokens_per_view", r.tokens_per_view},
                        {"merged_tokens_per_view", r.merged_tokens_per_view},
                        {"raw_tokens", r.raw_tokens},
                        {"merged_tokens", r.merged_tokens},
                        {"naive_position_ids", r.naive_position_ids},
                        {"shared_position_ids", r.shared_position_ids}};
}

}  // namespace minivlm
