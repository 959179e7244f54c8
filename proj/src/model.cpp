#include "minivlm/model.hpp"

#include "minivlm/errors.hpp"

namespace minivlm {

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
}

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::projector: return "projector";
    case ParamGroup::visual_experts: return "visual_experts";
    case ParamGroup::decoder_core: return "decoder_core";
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::embeddings: return "embeddings";
  }
  return "unknown";
}

std::optional<ParamGroup> parse_param_group(std::string_view s) {
  for (ParamGroup g : kAllGroups) {
    if (to_string(g) == s) return g;
  }
  return std::nullopt;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  p.encoder = EncoderParams::init(cfg.encoder, rng);
  p.projector = LinearParams::init(cfg.encoder.d_v, cfg.decoder.d_m, rng);
  p.decoder = DecoderParams::init(cfg.decoder, rng);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& t : tensors(z)) t.value->setZero();
  return z;
}

namespace {

template <class M, class P>
void visit_all(P& p, std::vector<BasicTensorRef<M>>& out) {
  auto add = [&](std::string name, ParamGroup g, int layer, M& m) {
    out.push_back(BasicTensorRef<M>{std::move(name), g, layer, &m});
  };
  auto linear = [&](const std::string& prefix, ParamGroup g, int layer, auto& lp) {
    add(prefix + ".w", g, layer, lp.w);
    add(prefix + ".b", g, layer, lp.b);
  };
  auto norm = [&](const std::string& prefix, ParamGroup g, int layer, auto& np) {
    add(prefix + ".gamma", g, layer, np.gamma);
    add(prefix + ".beta", g, layer, np.beta);
  };
  auto qkv = [&](const std::string& prefix, ParamGroup g, int layer, auto& qp) {
    linear(prefix + ".q", g, layer, qp.q);
    linear(prefix + ".k", g, layer, qp.k);
    linear(prefix + ".v", g, layer, qp.v);
  };

  constexpr auto enc = ParamGroup::encoder;
  linear("encoder.patch_embed", enc, 0, p.encoder.patch_embed);
  add("encoder.pos_embed", enc, 0, p.encoder.pos_embed);
  const int enc_layers = static_cast<int>(p.encoder.layers.size());
  for (int i = 0; i < enc_layers; ++i) {
    auto& b = p.encoder.layers[static_cast<std::size_t>(i)];
    const std::string pre = "encoder.layers." + std::to_string(i);
    norm(pre + ".ln1", enc, i, b.ln1);
    qkv(pre + ".qkv", enc, i, b.qkv);
    linear(pre + ".attn_out", enc, i, b.attn_out);
    norm(pre + ".ln2", enc, i, b.ln2);
    linear(pre + ".ffn.fc1", enc, i, b.ffn.fc1);
    linear(pre + ".ffn.fc2", enc, i, b.ffn.fc2);
  }
  norm("encoder.final_norm", enc, enc_layers > 0 ? enc_layers - 1 : 0, p.encoder.final_norm);

  linear("projector", ParamGroup::projector, -1, p.projector);

  constexpr auto core = ParamGroup::decoder_core;
  add("decoder.tok_embed", ParamGroup::embeddings, -1, p.decoder.tok_embed);
  for (std::size_t i = 0; i < p.decoder.layers.size(); ++i) {
    auto& l = p.decoder.layers[i];
    const std::string pre = "decoder.layers." + std::to_string(i);
    norm(pre + ".ln1", core, -1, l.ln1);
    qkv(pre + ".text_qkv", core, -1, l.text_qkv);
    qkv(pre + ".visual_qkv", ParamGroup::visual_experts, -1, l.visual_qkv);
    linear(pre + ".attn_out", core, -1, l.attn_out);
    norm(pre + ".ln2", core, -1, l.ln2);
    linear(pre + ".ffn.fc1", core, -1, l.ffn.fc1);
    linear(pre + ".ffn.fc2", core, -1, l.ffn.fc2);
  }
  norm("decoder.final_norm", core, -1, p.decoder.final_norm);
  linear("decoder.lm_head", core, -1, p.decoder.lm_head);
}

}  // namespace

std::vector<TensorRef> tensors(ModelParams& p) {
  std::vector<TensorRef> out;
  visit_all<Mat>(p, out);
  return out;
}

std::vector<ConstTensorRef> tensors(const ModelParams& p) {
  std::vector<ConstTensorRef> out;
  visit_all<const Mat>(p, out);
  return out;
}

std::int64_t parameter_count(const ModelParams& p, std::optional<ParamGroup> group) {
  std::int64_t n = 0;
  for (const auto& t : tensors(p)) {
    if (!group || t.group == *group) n += t.value->size();
  }
  return n;
}

std::size_t Example::view_count() const {
  std::size_t n = 0;
  for (const auto& part : parts) {
    if (const auto* media = std::get_if<MediaPart>(&part)) n += media->views.size();
  }
  return n;
}

EncodedViews encode_example(const ModelParams& params, const ModelConfig& cfg, const Example& ex) {
  EncodedViews out;
  out.reserve(ex.view_count());
  for (const auto& part : ex.parts) {
    if (const auto* media = std::get_if<MediaPart>(&part)) {
      for (const auto& v : media->views) out.push_back(encode_view(v, params.encoder, cfg.encoder));
    }
  }
  return out;
}

namespace {

struct VisualPath {
  std::vector<EncoderCache> encoder_caches;  // filled only when encoder grads are requested
  EncodedViews encoded;
  std::vector<TokenGrid> merged;
};

std::vector<PromptPart> build_prompt(const ModelParams& params, const ModelConfig& cfg,
                                     const Example& ex, const ForwardOptions& opt,
                                     const EncodedViews* encoded, VisualPath& path,
                                     bool cache_encoder) {
  if (opt.merge_window < 1) throw ContractError("model: merge_window must be >= 1");
  const std::size_t views = ex.view_count();
  if (encoded != nullptr && encoded->size() != views) {
    throw ContractError("model: precomputed encodings do not match the example's views");
  }
  if (cache_encoder) path.encoder_caches.resize(views);
  path.merged.reserve(views);
  std::vector<PromptPart> prompt;
  std::size_t view_index = 0;
  for (const auto& part : ex.parts) {
    if (const auto* text = std::get_if<TextPart>(&part)) {
      prompt.emplace_back(TextSpan{text->tokens, text->supervised});
      continue;
    }
    for (const auto& view : std::get<MediaPart>(part).views) {
      const TokenGrid* grid = nullptr;
      if (encoded != nullptr) {
        grid = &(*encoded)[view_index];
      } else {
        path.encoded.push_back(encode_view(
            view, params.encoder, cfg.encoder,
            cache_encoder ? &path.encoder_caches[view_index] : nullptr));
        grid = &path.encoded.back();
      }
      path.merged.push_back(merge(*grid, MergeSpec{opt.merge_window}));
      prompt.emplace_back(VisualFrame{project(path.merged.back().features, params.projector)});
      ++view_index;
    }
  }
  return prompt;
}

}  // namespace

ForwardResult model_forward(const ModelParams& params, const ModelConfig& cfg, const Example& ex,
                            const ForwardOptions& opt, const EncodedViews* encoded) {
  VisualPath path;
  const auto prompt = build_prompt(params, cfg, ex, opt, encoded, path, false);
  ForwardResult r;
  r.sequence = assemble_sequence(prompt, params.decoder.tok_embed);
  r.sequence.layout = assign_positions(r.sequence.layout, opt.position_mode);
  r.logits = decoder_logits(r.sequence.embeddings, r.sequence.layout, params.decoder, cfg.decoder);
  return r;
}

LossResult model_loss(const ModelParams& params, const ModelConfig& cfg, const Example& ex,
                      const ForwardOptions& opt, ModelParams* grad, const GradRequest& request,
                      const EncodedViews* encoded) {
  const bool want_grad = grad != nullptr;
  const bool encoder_grad = want_grad && request.visual_path && request.encoder;
  if (encoder_grad && encoded != nullptr) {
    throw ContractError("model_loss: encoder gradients need a fresh encoder pass");
  }
  VisualPath path;
  const auto prompt = build_prompt(params, cfg, ex, opt, encoded, path, encoder_grad);
  AssembledSequence seq = assemble_sequence(prompt, params.decoder.tok_embed);
  seq.layout = assign_positions(seq.layout, opt.position_mode);

  DecoderCache cache;
  const Mat logits = decoder_logits(seq.embeddings, seq.layout, params.decoder, cfg.decoder,
                                    want_grad ? &cache : nullptr);
  CrossEntropy ce = next_token_loss(logits, seq.targets, want_grad);
  LossResult result{ce.loss, ce.targets, ce.correct, seq.layout.total_tokens()};
  if (!want_grad || ce.targets == 0) return result;

  const Mat d_embed = decoder_backward(ce.d_logits, seq.layout, params.decoder, cfg.decoder, cache,
                                       grad->decoder);
  Eigen::Index row = 0;
  std::size_t view_index = 0;
  for (const auto& seg : seq.layout.entries) {
    const auto rows = static_cast<Eigen::Index>(seg.token_count);
    if (seg.kind == SegmentKind::text) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        grad->decoder.tok_embed.row(seq.token_ids[static_cast<std::size_t>(row + i)]) += d_embed.row(row + i);
      }
    } else if (request.visual_path) {
      const Mat d_tokens = d_embed.middleRows(row, rows);
      const TokenGrid& merged = path.merged[view_index];
      const Mat d_merged = linear_backward(merged.features, params.projector, d_tokens, &grad->projector);
      if (encoder_grad) {
        const TokenGrid& full = path.encoded[view_index];
        const Mat d_features = merge_backward(d_merged, full.g_h, full.g_w, MergeSpec{opt.merge_window});
        encode_view_backward(d_features, params.encoder, cfg.encoder,
                             path.encoder_caches[view_index], grad->encoder);
      }
      ++view_index;
    } else {
      ++view_index;
    }
    row += rows;
  }
  return result;
}

}  // namespace minivlm
