#pragma once

// JSON configuration files for the train / eval / gradcheck drivers.
// Unknown keys are rejected; every error names the offending field with a
// dotted path such as "phases[1].base_lr".

#include "minivlm/model.hpp"
#include "minivlm/pipeline.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace minivlm {

using json = nlohmann::json;

json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& j, const std::string& where = "model");

struct DataConfig {
  int train_images = 96;
  int train_videos = 96;
  int heldout_images = 24;
  int heldout_videos = 24;
  int max_patches = 12;
};

struct TrainConfig {
  std::uint64_t seed = 20240617;
  std::string output_dir = "runs/default";
  bool resume = false;
  ModelConfig model;
  DataConfig data;
  int merge_window_train = 2;
  int merge_window_eval = 3;
  PositionMode position_mode = PositionMode::shared_fpid;
  std::vector<PhaseConfig> phases;

  /// The default three-phase schedule (also shipped as configs/train_default.json).
  static TrainConfig defaults();
  /// Phase order, group invariants and numeric ranges.
  void validate() const;
};

json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

struct EvalConfig {
  std::uint64_t seed = 777;
  int heldout_images = 16;
  int heldout_videos = 16;
  int max_patches = 12;
  std::vector<int> merge_windows_eval = {1, 3};
  PositionMode position_mode = PositionMode::shared_fpid;
  bool instruction = false;
  int timing_repeats = 5;
  int warmup = 1;

  void validate() const;
};

json to_json(const EvalConfig& cfg);
EvalConfig eval_config_from_json(const json& j);
EvalConfig load_eval_config(const std::filesystem::path& path);

struct GradcheckConfig {
  std::uint64_t seed = 5;
  ModelConfig model;
  int views = 2;
  int text_tokens = 8;
  bool text_only = false;
  int merge_window = 2;
  PositionMode position_mode = PositionMode::shared_fpid;
  double epsilon = 1e-5;
  int coords_per_group = 20;
  double tolerance = 1e-3;

  void validate() const;
};

json to_json(const GradcheckConfig& cfg);
GradcheckConfig gradcheck_config_from_json(const json& j);
GradcheckConfig load_gradcheck_config(const std::filesystem::path& path);

/// Reads and parses a JSON file; syntax errors surface as ConfigError("<file>").
json read_json_file(const std::filesystem::path& path);

}  // namespace minivlm
