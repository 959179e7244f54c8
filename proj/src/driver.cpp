#include "minivlm/driver.hpp"

#include "minivlm/errors.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>

namespace minivlm {

namespace {

std::vector<const PreparedSample*> pointers(const std::vector<PreparedSample>& v) {
  std::vector<const PreparedSample*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(&s);
  return out;
}

void append(std::vector<const PreparedSample*>& dst, const std::vector<PreparedSample>& src) {
  for (const auto& s : src) dst.push_back(&s);
}


}  // namespace

DataOptions data_options_for(const ModelConfig& model, int max_patches) {
  DataOptions opt;
  opt.tile = model.encoder.tile_px;
  opt.max_patches = max_patches;
  const int t = model.encoder.tile_px;
  // Canvases and motion keep their proportions when the tile is not 336.
  opt.generator.image_canvases = {{t, t}, {t, 2 * t}, {2 * t, t}};
  opt.generator.frame_px = t;
  opt.generator.motion_step_px = std::max(1, t / 12);
  return opt;
}

TrainData make_train_data(const TrainConfig& cfg) {
  using synthetic::SampleKind;
  const DataOptions opt = data_options_for(cfg.model, cfg.data.max_patches);
  Rng seeds(cfg.seed);
  const std::uint64_t train_seed = seeds();
  const std::uint64_t heldout_seed = seeds();
  TrainData d;
  d.train_images = make_dataset(train_seed, SampleKind::image_caption, cfg.data.train_images, opt);
  d.train_videos = make_dataset(train_seed, SampleKind::video_caption, cfg.data.train_videos, opt);
  d.heldout_images = make_dataset(heldout_seed, SampleKind::image_caption, cfg.data.heldout_images, opt);
  d.heldout_videos = make_dataset(heldout_seed, SampleKind::video_caption, cfg.data.heldout_videos, opt);
  return d;
}

PhaseData phase_data(const TrainData& data, Phase phase) {
  PhaseData out;
  switch (phase) {
    case Phase::alignment:
      out.train = pointers(data.train_images);
      out.heldout = pointers(data.heldout_images);
      break;
    case Phase::multitask:
      out.train = pointers(data.train_images);
      append(out.train, data.train_videos);
      out.heldout = pointers(data.heldout_images);
      append(out.heldout, data.heldout_videos);
      break;
    case Phase::sft:
      out.train = pointers(data.train_videos);
      out.heldout = pointers(data.heldout_videos);
      out.instruction = true;
      break;
  }
  return out;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t index, Phase phase) {
  return dir / ("checkpoint_" + std::to_string(index + 1) + "_" + std::string(to_string(phase)) + ".mmda");
}

json to_json(const TrainReport& r) {
  return json{{"record", "phase"},
              {"phase", std::string(to_string(r.phase))},
              {"steps", r.losses.size()},
              {"initial_loss", r.losses.empty() ? 0.0 : r.losses.front()},
              {"final_smoothed_loss", smoothed_tail(r.losses)},
              {"heldout_accuracy", r.heldout_accuracy},
              {"heldout_targets", r.heldout_targets},
              {"tokens_per_sec", r.tokens_per_sec},
              {"wall_seconds", r.wall_seconds}};
}

TrainOutcome train(const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);

  TrainOutcome outcome;
  for (std::size_t i = 0; i < cfg.phases.size(); ++i) {
    outcome.checkpoints.push_back(checkpoint_path(dir, i, cfg.phases[i].phase));
  }
  outcome.params = ModelParams::init(cfg.model, cfg.seed);
  if (cfg.resume) {
    for (std::size_t i = cfg.phases.size(); i-- > 0;) {
      if (!std::filesystem::exists(outcome.checkpoints[i])) continue;
      Checkpoint ck = load_checkpoint(outcome.checkpoints[i]);
      if (!(ck.config == cfg.model)) {
        throw ConfigError("model", "does not match the checkpoint being resumed: " + outcome.checkpoints[i].string());
      }
      outcome.params = std::move(ck.params);
      outcome.resumed_phases = i + 1;
      break;
    }
  }

  const TrainData data = make_train_data(cfg);
  std::ofstream report(dir / "train_report.jsonl",
                       outcome.resumed_phases > 0 ? std::ios::app : std::ios::trunc);
  if (!report) throw ConfigError("output_dir", "cannot write train_report.jsonl");

  bool first_step = true;
  for (std::size_t i = outcome.resumed_phases; i < cfg.phases.size(); ++i) {
    const PhaseConfig& phase = cfg.phases[i];
    if (phase.phase != Phase::alignment) {
      // Visual experts restart from the text QKV when they are about to be trained
      // for the first time.
      bool experts_trained_before = false;
      for (std::size_t k = 0; k < i; ++k) experts_trained_before |= cfg.phases[k].trains(ParamGroup::visual_experts);
      if (!experts_trained_before && phase.trains(ParamGroup::visual_experts)) {
        for (auto& layer : outcome.params.decoder.layers) layer.copy_text_qkv_to_visual();
      }
    }
    const std::string name(to_string(phase.phase));
    if (log) *log << "phase " << name << ": " << phase.steps << " steps" << std::endl;
    auto observer = [&](const StepRecord& s) {
      if (first_step) {
        outcome.initial_loss = s.loss;
        first_step = false;
      }
      report << json{{"record", "step"}, {"phase", name}, {"step", s.step}, {"loss", s.loss},
                     {"tokens", s.tokens}, {"seconds", s.seconds}}.dump()
             << '\n';
      if (log && (s.step % 25 == 0 || s.step + 1 == phase.steps)) {
        *log << "  " << name << " step " << s.step << " loss " << s.loss << std::endl;
      }
    };
    TrainReport r = run_phase(outcome.params, cfg.model, phase, phase_data(data, phase.phase), observer);
    save_checkpoint(outcome.checkpoints[i], cfg.model, outcome.params);
    json rec = to_json(r);
    rec["checkpoint"] = outcome.checkpoints[i].string();
    report << rec.dump() << '\n';
    if (log) *log << "  " << name << " held-out accuracy " << r.heldout_accuracy << std::endl;
    outcome.final_smoothed_loss = smoothed_tail(r.losses);
    outcome.reports.push_back(std::move(r));
  }

  // Dynamic pooling: evaluate the trained model at the evaluation window.
  std::vector<const PreparedSample*> heldout = pointers(data.heldout_images);
  append(heldout, data.heldout_videos);
  if (!heldout.empty()) {
    const bool instruction = cfg.phases.back().phase == Phase::sft;
    std::vector<const PreparedSample*> images = pointers(data.heldout_images);
    std::vector<const PreparedSample*> videos = pointers(data.heldout_videos);
    Accuracy acc;
    const ForwardOptions fwd{cfg.merge_window_eval, cfg.position_mode};
    if (!images.empty()) {
      Accuracy a = evaluate_accuracy(outcome.params, cfg.model, images, false, fwd);
      acc.correct += a.correct;
      acc.targets += a.targets;
    }
    if (!videos.empty()) {
      Accuracy a = evaluate_accuracy(outcome.params, cfg.model, videos, instruction, fwd);
      acc.correct += a.correct;
      acc.targets += a.targets;
    }
    outcome.eval_accuracy = acc.fraction();
    report << json{{"record", "final"},
                   {"merge_window_train", cfg.merge_window_train},
                   {"merge_window_eval", cfg.merge_window_eval},
                   {"heldout_accuracy", outcome.eval_accuracy},
                   {"heldout_targets", acc.targets}}.dump()
           << '\n';
  }
  return outcome;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> time_forward(const ModelParams& params, const ModelConfig& cfg, const Example& ex,
                                 const ForwardOptions& opt, int repeats, int warmup) {
  using Clock = std::chrono::steady_clock;
  for (int i = 0; i < warmup; ++i) model_forward(params, cfg, ex, opt);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(repeats));
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = Clock::now();
    const ForwardResult r = model_forward(params, cfg, ex, opt);
    const auto t1 = Clock::now();
    if (r.logits.rows() == 0) throw ContractError("time_forward: empty forward");
    out.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return out;
}

EvalMetrics evaluate(const Checkpoint& ck, const EvalConfig& cfg) {
  cfg.validate();
  using synthetic::SampleKind;
  const DataOptions opt = data_options_for(ck.config, cfg.max_patches);
  Rng seeds(cfg.seed);
  const auto images = make_dataset(seeds(), SampleKind::image_caption, cfg.heldout_images, opt);
  const auto videos = make_dataset(seeds(), SampleKind::video_caption, cfg.heldout_videos, opt);
  if (images.empty() && videos.empty()) throw ContractError("evaluate: empty evaluation set");

  EvalMetrics m;
  m.samples = images.size() + videos.size();
  const PreparedSample& timing_sample = images.empty() ? videos.front() : images.front();
  const Example timing_example = build_example(timing_sample, cfg.instruction);
  const long long side = ck.config.encoder.grid_side();
  for (int w : cfg.merge_windows_eval) {
    const ForwardOptions fwd{w, cfg.position_mode};
    WindowMetrics wm;
    wm.merge_window = w;
    wm.visual_tokens_per_view = merged_token_count(side, w);
    Accuracy acc;
    if (!images.empty()) {
      const Accuracy a = evaluate_accuracy(ck.params, ck.config, pointers(images), cfg.instruction, fwd);
      acc.correct += a.correct;
      acc.targets += a.targets;
    }
    if (!videos.empty()) {
      const Accuracy a = evaluate_accuracy(ck.params, ck.config, pointers(videos), cfg.instruction, fwd);
      acc.correct += a.correct;
      acc.targets += a.targets;
    }
    wm.heldout_accuracy = acc.fraction();
    wm.targets = acc.targets;
    wm.forward_seconds = time_forward(ck.params, ck.config, timing_example, fwd, cfg.timing_repeats, cfg.warmup);
    wm.median_forward_seconds = median(wm.forward_seconds);
    wm.timing_tokens = model_forward(ck.params, ck.config, timing_example, fwd).sequence.layout.total_tokens();
    wm.tokens_per_sec = wm.median_forward_seconds > 0.0 ? wm.timing_tokens / wm.median_forward_seconds : 0.0;
    m.windows.push_back(std::move(wm));
  }
  return m;
}

json to_json(const EvalMetrics& m) {
  json windows = json::array();
  for (const auto& w : m.windows) {
    windows.push_back(json{{"merge_window", w.merge_window},
                           {"visual_tokens_per_view", w.visual_tokens_per_view},
                           {"heldout_accuracy", w.heldout_accuracy},
                           {"targets", w.targets},
                           {"timing_tokens", w.timing_tokens},
                           {"forward_seconds", w.forward_seconds},
                           {"median_forward_seconds", w.median_forward_seconds},
                           {"tokens_per_sec", w.tokens_per_sec}});
  }
  return json{{"samples", m.samples}, {"windows", windows}};
}

Example gradcheck_example(const GradcheckConfig& cfg) {
  Rng rng(cfg.seed);
  Example ex;
  if (!cfg.text_only && cfg.views > 0) {
    MediaPart media;
    const ImageDims dims{cfg.model.encoder.tile_px, cfg.model.encoder.tile_px};
    for (int v = 0; v < cfg.views; ++v) {
      RasterImage img(dims);
      for (double& p : img.pixels()) p = uniform01(rng);
      media.views.push_back(std::move(img));
    }
    ex.parts.emplace_back(std::move(media));
  }
  TextPart text;
  text.supervised = true;
  for (int i = 0; i < cfg.text_tokens; ++i) {
    text.tokens.push_back(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.model.decoder.vocab))));
  }
  ex.parts.emplace_back(std::move(text));
  return ex;
}

GradCheckReport run_gradcheck(const GradcheckConfig& cfg) {
  cfg.validate();
  const ModelParams params = ModelParams::init(cfg.model, cfg.seed);
  GradCheckOptions opt;
  opt.epsilon = cfg.epsilon;
  opt.coords_per_group = cfg.coords_per_group;
  opt.tolerance = cfg.tolerance;
  opt.seed = cfg.seed;
  return grad_check(params, cfg.model, gradcheck_example(cfg),
                    ForwardOptions{cfg.merge_window, cfg.position_mode}, opt);
}

json to_json(const GradCheckReport& r) {
  json groups = json::array();
  for (const auto& g : r.groups) {
    json failures = json::array();
    for (const auto& c : g.coords) {
      if (c.rel_error <= r.tolerance) continue;
      failures.push_back(json{{"tensor", c.tensor}, {"index", c.index}, {"analytic", c.analytic},
                              {"numeric", c.numeric}, {"rel_error", c.rel_error}});
    }
    groups.push_back(json{{"group", std::string(to_string(g.group))},
                          {"checked", g.coords.size()},
                          {"max_rel_error", g.max_rel_error},
                          {"max_abs_analytic", g.max_abs_analytic},
                          {"max_abs_numeric", g.max_abs_numeric},
                          {"analytic_all_zero", g.analytic_all_zero},
                          {"passed", g.passed},
                          {"failures", failures}});
  }
  return json{{"loss", r.loss}, {"epsilon", r.epsilon}, {"tolerance", r.tolerance},
              {"passed", r.passed()}, {"groups", groups}};
}

}  // namespace minivlm
