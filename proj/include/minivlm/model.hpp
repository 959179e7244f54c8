#pragma once

// Whole vision-language model: encoder -> merger -> projector -> decoder,
// plus the parameter-group registry used by training, checkpoints and
// gradient checks.

#include "minivlm/fpid.hpp"
#include "minivlm/merger.hpp"
#include "minivlm/vision_encoder.hpp"
#include "minivlm/vlm_core.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace minivlm {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class ParamGroup : std::uint8_t { projector, visual_experts, decoder_core, encoder, embeddings };

inline constexpr std::array<ParamGroup, 5> kAllGroups = {
    ParamGroup::projector, ParamGroup::visual_experts, ParamGroup::decoder_core,
    ParamGroup::encoder, ParamGroup::embeddings};

std::string_view to_string(ParamGroup g);
std::optional<ParamGroup> parse_param_group(std::string_view s);

struct ModelParams {
  EncoderParams encoder;
  ProjectorParams projector;
  DecoderParams decoder;

  /// Seeded initialization. Visual experts start as copies of the text QKV.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
  /// Same structure, every entry zero.
  static ModelParams zeros_like(const ModelParams& p);
};

/// Handle to one parameter tensor. `encoder_layer` is the depth index used by
/// layer-wise learning-rate decay (-1 outside the encoder).
template <class M>
struct BasicTensorRef {
  std::string name;
  ParamGroup group;
  int encoder_layer;
  M* value;
};

using TensorRef = BasicTensorRef<Mat>;
using ConstTensorRef = BasicTensorRef<const Mat>;

/// Every tensor in a fixed canonical order (the checkpoint order).
std::vector<TensorRef> tensors(ModelParams& p);
std::vector<ConstTensorRef> tensors(const ModelParams& p);

std::int64_t parameter_count(const ModelParams& p, std::optional<ParamGroup> group = std::nullopt);

/// Text tokens. Supervised spans provide next-token targets.
struct TextPart {
  std::vector<int> tokens;
  bool supervised = false;
};

/// One image (its split views) or one video (its frames). Each view is a
/// tile x tile raster and becomes one visual frame segment.
struct MediaPart {
  std::vector<RasterImage> views;
};

using ExamplePart = std::variant<TextPart, MediaPart>;

struct Example {
  std::vector<ExamplePart> parts;

  std::size_t view_count() const;
};

struct ForwardOptions {
  int merge_window = 2;
  PositionMode position_mode = PositionMode::shared_fpid;
};

/// Encoder outputs for an example's views in order, reusable while the
/// encoder is frozen.
using EncodedViews = std::vector<TokenGrid>;

EncodedViews encode_example(const ModelParams& params, const ModelConfig& cfg, const Example& ex);

struct ForwardResult {
  Mat logits;
  AssembledSequence sequence;   // layout carries assigned position ids
};

/// Inference forward. `encoded` (optional) replaces running the encoder.
ForwardResult model_forward(const ModelParams& params, const ModelConfig& cfg, const Example& ex,
                            const ForwardOptions& opt, const EncodedViews* encoded = nullptr);

struct LossResult {
  double loss = 0.0;
  std::int64_t targets = 0;
  std::int64_t correct = 0;
  std::int64_t tokens = 0;
};

struct GradRequest {
  /// Backpropagate into the encoder. Requires encoding inside the call.
  bool encoder = true;
  /// Backpropagate below the decoder (projector, encoder).
  bool visual_path = true;
};

/// Mean next-token cross-entropy of `ex`. When `grad` is non-null, gradients
/// are accumulated (+=) into it.
LossResult model_loss(const ModelParams& params, const ModelConfig& cfg, const Example& ex,
                      const ForwardOptions& opt, ModelParams* grad = nullptr,
                      const GradRequest& request = {}, const EncodedViews* encoded = nullptr);

}  // namespace minivlm
