#pragma once

// Projector and the toy decoder language model with visual-expert attention.
// Visual tokens compute Q/K/V with their own expert matrices, text tokens with
// the original ones; softmax, attention output and FFN are shared.

#include "minivlm/fpid.hpp"
#include "minivlm/nn.hpp"
#include "minivlm/tensor.hpp"

#include <variant>
#include <vector>

namespace minivlm {

struct DecoderConfig {
  int d_m = 128;
  int n_layers = 4;
  int n_heads = 4;
  int vocab = 512;
  int mlp_ratio = 4;
  double rope_base = 10000.0;

  int head_dim() const noexcept { return d_m / n_heads; }
  void validate() const;
  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

/// Affine map from encoder feature space (d_v) to the decoder embedding space (d_m).
using ProjectorParams = LinearParams;

struct ExpertLayerParams {
  LayerNormParams ln1;
  QkvParams text_qkv;
  QkvParams visual_qkv;
  LinearParams attn_out;
  LayerNormParams ln2;
  FfnParams ffn;

  /// Visual expert starts as an exact copy of the text QKV.
  static ExpertLayerParams init(const DecoderConfig& cfg, Rng& rng);
  void copy_text_qkv_to_visual() { visual_qkv = text_qkv; }
  BlockWeights weights() const {
    return BlockWeights{ln1, text_qkv, &visual_qkv, attn_out, ln2, ffn};
  }
};

struct DecoderParams {
  Mat tok_embed;  // (vocab, d_m)
  std::vector<ExpertLayerParams> layers;
  LayerNormParams final_norm;
  LinearParams lm_head;  // (d_m, vocab)

  static DecoderParams init(const DecoderConfig& cfg, Rng& rng);
};

/// Row-wise weight * x + bias. Throws ContractError on a width mismatch.
Mat project(const Mat& visual_features, const ProjectorParams& params);

struct TextSpan {
  std::vector<int> ids;
  bool supervised = false;  // next-token targets are drawn from supervised spans
};

/// Projected tokens of one frame (or one split view), one row per token.
struct VisualFrame {
  Mat tokens;
};

using PromptPart = std::variant<TextSpan, VisualFrame>;

struct AssembledSequence {
  Mat embeddings;                  // (n, d_m)
  SequenceLayout layout;           // token types filled, positions not yet assigned
  std::vector<int> token_ids;      // -1 at visual positions
  std::vector<int> targets;        // next-token target per position, -1 when unsupervised
};

/// Concatenates text embeddings and visual frames in prompt order. A position
/// t gets target token_ids[t + 1] when both t and t + 1 are text and t + 1
/// belongs to a supervised span. Throws ContractError for an empty sequence,
/// out-of-vocabulary ids, or visual frames of the wrong width.
AssembledSequence assemble_sequence(const std::vector<PromptPart>& parts, const Mat& tok_embed);

std::vector<std::uint8_t> route_tags(const SequenceLayout& layout);

/// One decoder layer: routed QKV, rotary encoding driven by the layout's
/// position ids, joint causal softmax, shared output projection and FFN.
/// Throws ContractError if the layout has no position ids.
Mat ve_attention_forward(const Mat& hidden, const SequenceLayout& layout,
                         const ExpertLayerParams& params, const DecoderConfig& cfg,
                         BlockCache* cache = nullptr);

Mat ve_attention_backward(const Mat& d_out, const SequenceLayout& layout,
                          const ExpertLayerParams& params, const DecoderConfig& cfg,
                          const BlockCache& cache, ExpertLayerParams& grad);

struct DecoderCache {
  std::vector<BlockCache> layers;
  LayerNormCache final_norm;
  Mat final_hidden;
};

/// Logits (n, vocab) for an assembled sequence whose layout carries position ids.
Mat decoder_logits(const Mat& embeddings, const SequenceLayout& layout, const DecoderParams& params,
                   const DecoderConfig& cfg, DecoderCache* cache = nullptr);

/// Returns d(loss)/d(embeddings) and accumulates decoder parameter gradients.
Mat decoder_backward(const Mat& d_logits, const SequenceLayout& layout, const DecoderParams& params,
                     const DecoderConfig& cfg, const DecoderCache& cache, DecoderParams& grad);

/// Assembles `parts`, assigns positions under `mode`, and runs the decoder.
Mat decoder_forward(const std::vector<PromptPart>& parts, PositionMode mode,
                    const DecoderParams& params, const DecoderConfig& cfg);

struct CrossEntropy {
  double loss = 0.0;      // mean over target positions
  Mat d_logits;           // gradient of the mean loss
  std::int64_t targets = 0;
  std::int64_t correct = 0;  // argmax hits
};

/// Next-token cross-entropy over positions with targets[t] >= 0.
CrossEntropy next_token_loss(const Mat& logits, const std::vector<int>& targets,
                             bool want_grad = true);

}  // namespace minivlm
