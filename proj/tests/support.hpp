#pragma once

#include "minivlm/config.hpp"
#include "minivlm/driver.hpp"

namespace testing {

// 56 px views (4x4 tokens) and a narrow decoder: same code paths as the
// default model at a fraction of the cost.
inline minivlm::ModelConfig small_model() {
  minivlm::ModelConfig cfg;
  cfg.encoder.tile_px = 56;
  cfg.encoder.d_v = 16;
  cfg.encoder.n_heads = 2;
  cfg.decoder.d_m = 32;
  cfg.decoder.n_layers = 2;
  cfg.decoder.n_heads = 2;
  cfg.decoder.vocab = 64;
  return cfg;
}

inline minivlm::TrainConfig small_train_config(const std::string& output_dir) {
  minivlm::TrainConfig cfg = minivlm::TrainConfig::defaults();
  cfg.model = small_model();
  cfg.output_dir = output_dir;
  cfg.data = {12, 12, 4, 4, 6};
  for (auto& p : cfg.phases) {
    p.steps = 3;
    p.batch_size = 2;
  }
  return cfg;
}

}  // namespace testing
