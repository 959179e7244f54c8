#include "minivlm/pipeline.hpp"

#include "minivlm/errors.hpp"
#include "minivlm/glhr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

namespace minivlm {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::alignment: return "alignment";
    case Phase::multitask: return "multitask";
    case Phase::sft: return "sft";
  }
  return "unknown";
}

std::optional<Phase> parse_phase(std::string_view s) {
  for (Phase p : {Phase::alignment, Phase::multitask, Phase::sft}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

std::vector<ParamGroup> default_trainable_groups(Phase p) {
  switch (p) {
    case Phase::alignment: return {ParamGroup::projector};
    // The toy decoder is not pretrained, so multitask also opens the decoder
    // core and embeddings; only the encoder stays frozen until sft.
    case Phase::multitask:
      return {ParamGroup::projector, ParamGroup::visual_experts, ParamGroup::decoder_core, ParamGroup::embeddings};
    case Phase::sft: return {kAllGroups.begin(), kAllGroups.end()};
  }
  return {};
}

bool PhaseConfig::trains(ParamGroup g) const {
  return std::find(trainable_groups.begin(), trainable_groups.end(), g) != trainable_groups.end();
}

void PhaseConfig::validate(std::string_view where) const {
  const std::string at(where);
  auto has = [&](ParamGroup g) { return trains(g); };
  std::vector<ParamGroup> sorted = trainable_groups;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError(at + ".trainable_groups", "duplicate group");
  }
  switch (phase) {
    case Phase::alignment:
      if (sorted != std::vector<ParamGroup>{ParamGroup::projector}) {
        throw ConfigError(at + ".trainable_groups", "alignment trains exactly {projector}");
      }
      break;
    case Phase::multitask:
      if (!has(ParamGroup::projector) || !has(ParamGroup::visual_experts)) {
        throw ConfigError(at + ".trainable_groups", "multitask must include projector and visual_experts");
      }
      break;
    case Phase::sft:
      if (sorted.size() != kAllGroups.size()) {
        throw ConfigError(at + ".trainable_groups", "sft trains every group");
      }
      break;
  }
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError(at + ".base_lr", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError(at + ".momentum", "must be in [0, 1)");
  if (!(grad_clip >= 0.0)) throw ConfigError(at + ".grad_clip", "must be non-negative");
  if (!(encoder_layer_decay > 0.0 && encoder_layer_decay <= 1.0)) {
    throw ConfigError(at + ".encoder_layer_decay", "must be in (0, 1]");
  }
  if (steps < 0) throw ConfigError(at + ".steps", "must be non-negative");
  if (batch_size < 1) throw ConfigError(at + ".batch_size", "must be positive");
  if (merge_window < 1) throw ConfigError(at + ".merge_window", "must be positive");
}

double layerwise_lr(double base_lr, double decay, int layer_index, int n_layers) {
  if (!(decay > 0.0 && decay <= 1.0)) throw ContractError("layerwise_lr: decay must be in (0, 1]");
  if (layer_index < 0 || layer_index >= n_layers) throw ContractError("layerwise_lr: layer index out of range");
  return base_lr * std::pow(decay, n_layers - 1 - layer_index);
}

PreparedSample prepare_sample(synthetic::SyntheticSample sample, const DataOptions& opt) {
  PreparedSample out;
  if (sample.kind == synthetic::SampleKind::image_caption) {
    const RasterImage& img = sample.media.at(0);
    out.views = apply_split(img, plan_split(img.dims(), opt.tile, opt.max_patches, true));
  } else {
    for (const auto& frame : sample.media) {
      out.views.push_back(resize_bilinear(frame, ImageDims{opt.tile, opt.tile}));
    }
  }
  // Views carry everything the model needs; drop the source pixels.
  sample.media.clear();
  out.sample = std::move(sample);
  return out;
}

std::vector<PreparedSample> make_dataset(std::uint64_t seed, synthetic::SampleKind kind, int count,
                                         const DataOptions& opt) {
  std::vector<PreparedSample> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  Rng seeder(seed ^ (kind == synthetic::SampleKind::image_caption ? 0x1b873593ULL : 0xcc9e2d51ULL));
  for (int i = 0; i < count; ++i) {
    out.push_back(prepare_sample(synthetic::generate_sample(seeder(), kind, opt.generator), opt));
  }
  return out;
}

Example build_example(const PreparedSample& s, bool instruction) {
  Example ex;
  if (instruction) ex.parts.emplace_back(TextPart{synthetic::instruction_prefix(s.sample.kind), false});
  ex.parts.emplace_back(MediaPart{s.views});
  ex.parts.emplace_back(TextPart{s.sample.caption, true});
  return ex;
}

double smoothed_tail(const std::vector<double>& losses, std::size_t window) {
  if (losses.empty()) return 0.0;
  const std::size_t n = std::min(window, losses.size());
  double sum = 0.0;
  for (std::size_t i = losses.size() - n; i < losses.size(); ++i) sum += losses[i];
  return sum / static_cast<double>(n);
}

Accuracy evaluate_accuracy(const ModelParams& params, const ModelConfig& cfg,
                           const std::vector<const PreparedSample*>& samples, bool instruction,
                           const ForwardOptions& opt) {
  if (samples.empty()) throw ContractError("evaluate_accuracy: empty evaluation set");
  Accuracy acc;
  for (const PreparedSample* s : samples) {
    const LossResult r = model_loss(params, cfg, build_example(*s, instruction), opt);
    acc.correct += r.correct;
    acc.targets += r.targets;
  }
  return acc;
}

namespace {

double learning_rate(const TensorRef& t, const PhaseConfig& cfg, int encoder_layers) {
  if (t.group != ParamGroup::encoder || encoder_layers == 0) return cfg.base_lr;
  return layerwise_lr(cfg.base_lr, cfg.encoder_layer_decay, t.encoder_layer, encoder_layers);
}

std::string diagnostic_dump(const PhaseConfig& cfg, int step, const std::vector<std::size_t>& batch,
                            const std::vector<double>& sample_losses, const ModelParams& params) {
  std::ostringstream os;
  os << "non-finite loss in phase " << to_string(cfg.phase) << " at step " << step << "; batch samples [";
  for (std::size_t i = 0; i < batch.size(); ++i) os << (i ? ", " : "") << batch[i];
  os << "]; sample losses [";
  for (std::size_t i = 0; i < sample_losses.size(); ++i) os << (i ? ", " : "") << sample_losses[i];
  os << "]; parameter norms {";
  std::map<ParamGroup, double> sq;
  for (const auto& t : tensors(params)) sq[t.group] += t.value->squaredNorm();
  bool first = true;
  for (const auto& [g, v] : sq) {
    os << (first ? "" : ", ") << to_string(g) << ": " << std::sqrt(v);
    first = false;
  }
  os << "}";
  return os.str();
}

}  // namespace

void sgd_step(ModelParams& params, const ModelParams& grad, ModelParams& velocity,
              const PhaseConfig& cfg) {
  auto p = tensors(params);
  const auto g = tensors(grad);
  auto v = tensors(velocity);
  const int encoder_layers = static_cast<int>(params.encoder.layers.size());
  double scale = 1.0;
  if (cfg.grad_clip > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (cfg.trains(p[i].group)) sq += g[i].value->squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) scale = cfg.grad_clip / norm;
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!cfg.trains(p[i].group)) continue;
    const double lr = learning_rate(p[i], cfg, encoder_layers);
    Mat& vel = *v[i].value;
    vel = cfg.momentum * vel + scale * *g[i].value;
    *p[i].value -= lr * vel;
  }
}

TrainReport run_phase(ModelParams& params, const ModelConfig& model_cfg, const PhaseConfig& cfg,
                      const PhaseData& data, const StepObserver& observer) {
  cfg.validate();
  if (cfg.steps > 0 && data.train.empty()) throw ContractError("run_phase: empty training set");
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  TrainReport report;
  report.phase = cfg.phase;
  const ForwardOptions fwd{cfg.merge_window, cfg.position_mode};
  const bool encoder_frozen = !cfg.trains(ParamGroup::encoder);
  GradRequest request;
  request.encoder = !encoder_frozen;
  request.visual_path = cfg.trains(ParamGroup::projector) || cfg.trains(ParamGroup::encoder);

  // Encoder outputs stay valid for the whole phase while the encoder is frozen.
  std::map<const PreparedSample*, EncodedViews> encoded_cache;
  auto encoded_for = [&](const PreparedSample* s, const Example& ex) -> const EncodedViews* {
    if (!encoder_frozen) return nullptr;
    auto it = encoded_cache.find(s);
    if (it == encoded_cache.end()) it = encoded_cache.emplace(s, encode_example(params, model_cfg, ex)).first;
    return &it->second;
  };

  Rng rng(cfg.seed);
  ModelParams grad = ModelParams::zeros_like(params);
  ModelParams velocity = ModelParams::zeros_like(params);
  std::int64_t total_tokens = 0;
  std::vector<std::size_t> batch(static_cast<std::size_t>(cfg.batch_size));
  std::vector<double> sample_losses(batch.size());

  for (int step = 0; step < cfg.steps; ++step) {
    const auto step_start = Clock::now();
    for (auto& t : tensors(grad)) t.value->setZero();
    for (auto& b : batch) b = static_cast<std::size_t>(uniform_index(rng, data.train.size()));
    double loss_sum = 0.0;
    std::int64_t step_tokens = 0;
    // Fixed sequential reduction order keeps the loss sequence reproducible.
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const PreparedSample* s = data.train[batch[i]];
      const Example ex = build_example(*s, data.instruction);
      const LossResult r = model_loss(params, model_cfg, ex, fwd, &grad, request, encoded_for(s, ex));
      sample_losses[i] = r.loss;
      loss_sum += r.loss;
      step_tokens += r.tokens;
    }
    const double loss = loss_sum / static_cast<double>(batch.size());
    if (!std::isfinite(loss)) {
      throw TrainingDiverged(diagnostic_dump(cfg, step, batch, sample_losses, params));
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& t : tensors(grad)) *t.value *= inv;
    sgd_step(params, grad, velocity, cfg);

    report.losses.push_back(loss);
    total_tokens += step_tokens;
    if (observer) {
      observer(StepRecord{step, loss, step_tokens,
                          std::chrono::duration<double>(Clock::now() - step_start).count()});
    }
  }
  const double train_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  report.tokens_per_sec = train_seconds > 0.0 ? static_cast<double>(total_tokens) / train_seconds : 0.0;

  if (!data.heldout.empty()) {
    Accuracy acc;
    for (const PreparedSample* s : data.heldout) {
      const Example ex = build_example(*s, data.instruction);
      const LossResult r = model_loss(params, model_cfg, ex, fwd);
      acc.correct += r.correct;
      acc.targets += r.targets;
    }
    report.heldout_accuracy = acc.fraction();
    report.heldout_targets = acc.targets;
  }
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

}  // namespace minivlm
