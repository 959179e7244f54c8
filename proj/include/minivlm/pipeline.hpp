#pragma once

// Three-phase training (alignment -> multitask -> sft) with parameter-group
// freezing, layer-wise learning-rate decay on the encoder, and plain SGD.
//
// Update rule for every tensor in a trainable group, with g the batch-mean
// gradient:
//   g <- g * min(1, grad_clip / ||g||)   (only when grad_clip > 0; norm over all trainable tensors)
//   v <- momentum * v + g                (v starts at zero each phase)
//   theta <- theta - lr * v

#include "minivlm/model.hpp"
#include "minivlm/synthetic.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace minivlm {

enum class Phase { alignment, multitask, sft };

std::string_view to_string(Phase p);
std::optional<Phase> parse_phase(std::string_view s);

/// alignment: {projector}; multitask: every group but the encoder; sft: all
/// groups. Validation only requires multitask to include projector and
/// visual_experts.
std::vector<ParamGroup> default_trainable_groups(Phase p);

struct PhaseConfig {
  Phase phase = Phase::alignment;
  std::vector<ParamGroup> trainable_groups = default_trainable_groups(Phase::alignment);
  double base_lr = 0.05;
  double momentum = 0.0;
  double grad_clip = 0.0;
  double encoder_layer_decay = 1.0;
  int steps = 100;
  int batch_size = 4;
  int merge_window = 2;
  PositionMode position_mode = PositionMode::shared_fpid;
  std::uint64_t seed = 0;

  bool trains(ParamGroup g) const;
  /// Checks the group invariants of the phase and numeric ranges.
  /// Throws ConfigError naming the field relative to `where`.
  void validate(std::string_view where = "phase") const;
};

/// base_lr * decay^(n_layers - 1 - layer_index): the output-nearest layer
/// gets base_lr, the input-nearest the smallest rate.
double layerwise_lr(double base_lr, double decay, int layer_index, int n_layers);

/// A synthetic sample with its encoder views already cut (split views for
/// images, one view per frame for videos).
struct PreparedSample {
  synthetic::SyntheticSample sample;
  std::vector<RasterImage> views;
};

struct DataOptions {
  int tile = 336;
  int max_patches = 12;
  synthetic::GeneratorOptions generator;
};

PreparedSample prepare_sample(synthetic::SyntheticSample sample, const DataOptions& opt);

/// `count` samples of `kind`; sample i uses a seed derived from (seed, kind, i).
std::vector<PreparedSample> make_dataset(std::uint64_t seed, synthetic::SampleKind kind, int count,
                                         const DataOptions& opt);

/// [instruction prefix] media caption, with the caption supervised.
Example build_example(const PreparedSample& s, bool instruction);

struct PhaseData {
  std::vector<const PreparedSample*> train;
  std::vector<const PreparedSample*> heldout;
  bool instruction = false;
};

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  std::int64_t tokens = 0;
  double seconds = 0.0;
};

struct TrainReport {
  Phase phase = Phase::alignment;
  std::vector<double> losses;   // one per step
  double heldout_accuracy = 0.0;
  std::int64_t heldout_targets = 0;
  double tokens_per_sec = 0.0;
  double wall_seconds = 0.0;
};

/// Mean of the last `window` entries (all of them when shorter).
double smoothed_tail(const std::vector<double>& losses, std::size_t window = 10);

struct Accuracy {
  std::int64_t correct = 0;
  std::int64_t targets = 0;
  double fraction() const { return targets == 0 ? 0.0 : static_cast<double>(correct) / targets; }
};

/// Next-token argmax accuracy over caption targets. Throws ContractError for
/// an empty sample set.
Accuracy evaluate_accuracy(const ModelParams& params, const ModelConfig& cfg,
                           const std::vector<const PreparedSample*>& samples, bool instruction,
                           const ForwardOptions& opt);

using StepObserver = std::function<void(const StepRecord&)>;

/// Trains `params` in place. Tensors outside cfg.trainable_groups are never
/// written. Throws TrainingDiverged (with a diagnostic dump in the message)
/// on a non-finite loss.
TrainReport run_phase(ModelParams& params, const ModelConfig& model_cfg, const PhaseConfig& cfg,
                      const PhaseData& data, const StepObserver& observer = {});

/// One SGD step with the documented rule on an already-averaged gradient.
/// `velocity` must have the structure of `params` (zero at phase start).
void sgd_step(ModelParams& params, const ModelParams& grad, ModelParams& velocity,
              const PhaseConfig& cfg);

}  // namespace minivlm
