#include "minivlm/vlm_core.hpp"

#include "minivlm/errors.hpp"

#include <cmath>

namespace minivlm {

void DecoderConfig::validate() const {
  if (d_m < 1) throw ConfigError("decoder.d_m", "must be positive");
  if (n_layers < 0) throw ConfigError("decoder.n_layers", "must be non-negative");
  if (n_heads < 1 || d_m % n_heads != 0) throw ConfigError("decoder.n_heads", "must divide d_m");
  if (head_dim() % 2 != 0) throw ConfigError("decoder.n_heads", "head dimension must be even");
  if (vocab < 2) throw ConfigError("decoder.vocab", "must be at least 2");
  if (mlp_ratio < 1) throw ConfigError("decoder.mlp_ratio", "must be positive");
  if (!(rope_base > 1.0)) throw ConfigError("decoder.rope_base", "must be greater than 1");
}

ExpertLayerParams ExpertLayerParams::init(const DecoderConfig& cfg, Rng& rng) {
  ExpertLayerParams p;
  const int d = cfg.d_m;
  p.ln1 = LayerNormParams::init(d);
  p.text_qkv.q = LinearParams::init(d, d, rng);
  p.text_qkv.k = LinearParams::init(d, d, rng);
  p.text_qkv.v = LinearParams::init(d, d, rng);
  p.copy_text_qkv_to_visual();
  p.attn_out = LinearParams::init(d, d, rng);
  p.ln2 = LayerNormParams::init(d);
  p.ffn.fc1 = LinearParams::init(d, d * cfg.mlp_ratio, rng);
  p.ffn.fc2 = LinearParams::init(d * cfg.mlp_ratio, d, rng);
  return p;
}

DecoderParams DecoderParams::init(const DecoderConfig& cfg, Rng& rng) {
  cfg.validate();
  DecoderParams p;
  p.tok_embed = Mat(cfg.vocab, cfg.d_m);
  init_uniform_fan_in(p.tok_embed, cfg.d_m, rng);
  for (int i = 0; i < cfg.n_layers; ++i) p.layers.push_back(ExpertLayerParams::init(cfg, rng));
  p.final_norm = LayerNormParams::init(cfg.d_m);
  p.lm_head = LinearParams::init(cfg.d_m, cfg.vocab, rng);
  return p;
}

Mat project(const Mat& visual_features, const ProjectorParams& params) {
  if (visual_features.cols() != params.w.rows()) {
    throw ContractError("project: feature width " + std::to_string(visual_features.cols()) +
                        " does not match projector input " + std::to_string(params.w.rows()));
  }
  return linear(visual_features, params);
}

AssembledSequence assemble_sequence(const std::vector<PromptPart>& parts, const Mat& tok_embed) {
  std::vector<Segment> segments;
  std::vector<bool> supervised;
  Eigen::Index n = 0;
  for (const auto& part : parts) {
    if (const auto* text = std::get_if<TextSpan>(&part)) {
      if (text->ids.empty()) continue;
      for (int id : text->ids) {
        if (id < 0 || id >= tok_embed.rows()) {
          throw ContractError("assemble_sequence: token id " + std::to_string(id) + " outside vocabulary");
        }
      }
      segments.push_back({SegmentKind::text, static_cast<std::int64_t>(text->ids.size())});
      supervised.insert(supervised.end(), text->ids.size(), text->supervised);
      n += static_cast<Eigen::Index>(text->ids.size());
    } else {
      const auto& frame = std::get<VisualFrame>(part);
      if (frame.tokens.rows() == 0) continue;
      if (frame.tokens.cols() != tok_embed.cols()) {
        throw ContractError("assemble_sequence: visual tokens must have the embedding width");
      }
      segments.push_back({SegmentKind::visual_frame, frame.tokens.rows()});
      supervised.insert(supervised.end(), static_cast<std::size_t>(frame.tokens.rows()), false);
      n += frame.tokens.rows();
    }
  }
  if (n == 0) throw ContractError("assemble_sequence: empty sequence");

  AssembledSequence seq;
  seq.layout = make_layout(std::move(segments));
  seq.embeddings = Mat(n, tok_embed.cols());
  seq.token_ids.assign(static_cast<std::size_t>(n), -1);
  Eigen::Index row = 0;
  for (const auto& part : parts) {
    if (const auto* text = std::get_if<TextSpan>(&part)) {
      for (int id : text->ids) {
        seq.embeddings.row(row) = tok_embed.row(id);
        seq.token_ids[static_cast<std::size_t>(row)] = id;
        ++row;
      }
    } else {
      const auto& frame = std::get<VisualFrame>(part);
      seq.embeddings.middleRows(row, frame.tokens.rows()) = frame.tokens;
      row += frame.tokens.rows();
    }
  }
  seq.targets.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t t = 0; t + 1 < static_cast<std::size_t>(n); ++t) {
    if (seq.token_ids[t] >= 0 && seq.token_ids[t + 1] >= 0 && supervised[t + 1]) {
      seq.targets[t] = seq.token_ids[t + 1];
    }
  }
  return seq;
}

std::vector<std::uint8_t> route_tags(const SequenceLayout& layout) {
  std::vector<std::uint8_t> tags(layout.token_types.size());
  for (std::size_t i = 0; i < tags.size(); ++i) tags[i] = layout.token_types[i] == TokenType::visual ? 1 : 0;
  return tags;
}

namespace {

BlockOptions layer_options(const SequenceLayout& layout, const DecoderConfig& cfg,
                           const std::vector<std::uint8_t>& tags) {
  if (!layout.has_positions()) throw ContractError("decoder: layout has no position ids");
  if (layout.token_types.size() != layout.position_ids.size()) {
    throw ContractError("decoder: layout has no token types");
  }
  BlockOptions opt;
  opt.n_heads = cfg.n_heads;
  opt.causal = true;
  opt.routes = tags;
  opt.positions = layout.position_ids;
  opt.rope_base = cfg.rope_base;
  return opt;
}

BlockGrads layer_grads(ExpertLayerParams& g) {
  return BlockGrads{&g.ln1, &g.text_qkv, &g.visual_qkv, &g.attn_out, &g.ln2, &g.ffn};
}

}  // namespace

Mat ve_attention_forward(const Mat& hidden, const SequenceLayout& layout,
                         const ExpertLayerParams& params, const DecoderConfig& cfg,
                         BlockCache* cache) {
  if (hidden.rows() != layout.total_tokens()) {
    throw ContractError("ve_attention_forward: hidden rows do not match layout");
  }
  const auto tags = route_tags(layout);
  return block_forward(hidden, params.weights(), layer_options(layout, cfg, tags), cache);
}

Mat ve_attention_backward(const Mat& d_out, const SequenceLayout& layout,
                          const ExpertLayerParams& params, const DecoderConfig& cfg,
                          const BlockCache& cache, ExpertLayerParams& grad) {
  const auto tags = route_tags(layout);
  return block_backward(d_out, params.weights(), layer_options(layout, cfg, tags), cache,
                        layer_grads(grad));
}

Mat decoder_logits(const Mat& embeddings, const SequenceLayout& layout, const DecoderParams& params,
                   const DecoderConfig& cfg, DecoderCache* cache) {
  if (embeddings.rows() != layout.total_tokens() || embeddings.cols() != cfg.d_m) {
    throw ContractError("decoder_logits: embeddings do not match layout / d_m");
  }
  const auto tags = route_tags(layout);
  const BlockOptions opt = layer_options(layout, cfg, tags);
  if (cache != nullptr) cache->layers.resize(params.layers.size());
  Mat x = embeddings;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    x = block_forward(x, params.layers[i].weights(), opt, cache ? &cache->layers[i] : nullptr);
  }
  Mat h = layer_norm(x, params.final_norm, cache ? &cache->final_norm : nullptr);
  Mat logits = linear(h, params.lm_head);
  if (cache != nullptr) cache->final_hidden = std::move(h);
  return logits;
}

Mat decoder_backward(const Mat& d_logits, const SequenceLayout& layout, const DecoderParams& params,
                     const DecoderConfig& cfg, const DecoderCache& cache, DecoderParams& grad) {
  const auto tags = route_tags(layout);
  const BlockOptions opt = layer_options(layout, cfg, tags);
  Mat dh = linear_backward(cache.final_hidden, params.lm_head, d_logits, &grad.lm_head);
  Mat dx = layer_norm_backward(dh, params.final_norm, cache.final_norm, &grad.final_norm);
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    dx = block_backward(dx, params.layers[i].weights(), opt, cache.layers[i],
                        layer_grads(grad.layers[i]));
  }
  return dx;
}

Mat decoder_forward(const std::vector<PromptPart>& parts, PositionMode mode,
                    const DecoderParams& params, const DecoderConfig& cfg) {
  AssembledSequence seq = assemble_sequence(parts, params.tok_embed);
  const SequenceLayout layout = assign_positions(seq.layout, mode);
  return decoder_logits(seq.embeddings, layout, params, cfg);
}

CrossEntropy next_token_loss(const Mat& logits, const std::vector<int>& targets, bool want_grad) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw ContractError("next_token_loss: one target slot per position is required");
  }
  CrossEntropy ce;
  for (int t : targets) ce.targets += t >= 0 ? 1 : 0;
  if (want_grad) ce.d_logits = Mat::Zero(logits.rows(), logits.cols());
  if (ce.targets == 0) return ce;
  const double inv = 1.0 / static_cast<double>(ce.targets);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int target = targets[static_cast<std::size_t>(i)];
    if (target < 0) continue;
    if (target >= logits.cols()) throw ContractError("next_token_loss: target outside vocabulary");
    const auto row = logits.row(i);
    Eigen::Index best = 0;
    const double mx = row.maxCoeff(&best);
    const Eigen::RowVectorXd e = (row.array() - mx).exp().matrix();
    const double z = e.sum();
    total += std::log(z) + mx - row(target);
    if (best == target) ++ce.correct;
    if (want_grad) {
      ce.d_logits.row(i) = e * (inv / z);
      ce.d_logits(i, target) -= inv;
    }
  }
  ce.loss = total * inv;
  return ce;
}

}  // namespace minivlm
