#pragma once

// Orchestration shared by the command-line tool and the Python module:
// multi-phase training with checkpoints and JSONL reports, evaluation with
// timing, and the gradient-check runner.

#include "minivlm/checkpoint.hpp"
#include "minivlm/config.hpp"
#include "minivlm/gradcheck.hpp"
#include "minivlm/pipeline.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace minivlm {

/// Data options for a model: canvases, frame size and motion step scale with
/// the encoder tile (336 gives the generator defaults).
DataOptions data_options_for(const ModelConfig& model, int max_patches);

struct TrainData {
  std::vector<PreparedSample> train_images;
  std::vector<PreparedSample> train_videos;
  std::vector<PreparedSample> heldout_images;
  std::vector<PreparedSample> heldout_videos;
};

TrainData make_train_data(const TrainConfig& cfg);

/// alignment: images; multitask: images and videos; sft: videos with the
/// instruction prefix.
PhaseData phase_data(const TrainData& data, Phase phase);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t index, Phase phase);

struct TrainOutcome {
  std::vector<TrainReport> reports;             // phases run in this call
  std::vector<std::filesystem::path> checkpoints;  // one per configured phase
  std::size_t resumed_phases = 0;               // phases skipped thanks to existing checkpoints
  ModelParams params;
  double initial_loss = 0.0;          // loss at the first step run
  double final_smoothed_loss = 0.0;   // smoothed tail of the last phase run
  double eval_accuracy = 0.0;         // held-out accuracy at merge_window_eval
};

/// Runs the configured phases in order, writing one checkpoint per phase and
/// line-delimited JSON records to <output_dir>/train_report.jsonl. With
/// `resume`, phases whose checkpoint already exists are skipped and training
/// continues from the latest one. Progress lines go to `log` when given.
TrainOutcome train(const TrainConfig& cfg, std::ostream* log = nullptr);

struct WindowMetrics {
  int merge_window = 1;
  long long visual_tokens_per_view = 0;
  double heldout_accuracy = 0.0;
  std::int64_t targets = 0;
  long long timing_tokens = 0;
  std::vector<double> forward_seconds;
  double median_forward_seconds = 0.0;
  double tokens_per_sec = 0.0;
};

struct EvalMetrics {
  std::size_t samples = 0;
  std::vector<WindowMetrics> windows;
};

double median(std::vector<double> values);

/// Forward wall times: `warmup` discarded runs, then `repeats` timed runs on a
/// monotonic clock.
std::vector<double> time_forward(const ModelParams& params, const ModelConfig& cfg, const Example& ex,
                                 const ForwardOptions& opt, int repeats, int warmup);

/// Held-out accuracy and forward timing for each requested merge window.
/// Throws ContractError when the evaluation set is empty.
EvalMetrics evaluate(const Checkpoint& ck, const EvalConfig& cfg);

json to_json(const EvalMetrics& m);

/// The gradient-check instance: `views` seeded-noise views followed by
/// `text_tokens` supervised random tokens (no views when text_only).
Example gradcheck_example(const GradcheckConfig& cfg);

GradCheckReport run_gradcheck(const GradcheckConfig& cfg);

json to_json(const GradCheckReport& r);
json to_json(const TrainReport& r);

}  // namespace minivlm
