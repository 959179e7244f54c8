#include "minivlm/config.hpp"

#include "minivlm/errors.hpp"

#include <fstream>
#include <set>

namespace minivlm {

namespace {

/// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_.empty() ? "<root>" : where_, "expected an object");
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void read(const std::string& key, T& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError(path(key), "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError(path(key), "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0) {
            throw ConfigError(path(key), "expected a non-negative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError(path(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw ConfigError(path(key), "expected a string");
      }
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key), e.what());
    }
  }

  void read_mode(const std::string& key, PositionMode& out) {
    std::string s;
    if (find(key) == nullptr) return;
    read(key, s);
    auto m = parse_position_mode(s);
    if (!m) throw ConfigError(path(key), "expected \"naive\" or \"shared_fpid\"");
    out = *m;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json to_json(const EncoderConfig& c) {
  return json{{"tile_px", c.tile_px}, {"patch_px", c.patch_px}, {"d_v", c.d_v},
              {"n_layers", c.n_layers}, {"n_heads", c.n_heads}, {"mlp_ratio", c.mlp_ratio}};
}

json to_json(const DecoderConfig& c) {
  return json{{"d_m", c.d_m}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads},
              {"vocab", c.vocab}, {"mlp_ratio", c.mlp_ratio}, {"rope_base", c.rope_base}};
}

json to_json(const DataConfig& c) {
  return json{{"train_images", c.train_images}, {"train_videos", c.train_videos},
              {"heldout_images", c.heldout_images}, {"heldout_videos", c.heldout_videos},
              {"max_patches", c.max_patches}};
}

json groups_to_json(const std::vector<ParamGroup>& groups) {
  json arr = json::array();
  for (ParamGroup g : groups) arr.push_back(std::string(to_string(g)));
  return arr;
}

json to_json(const PhaseConfig& p) {
  return json{{"phase", std::string(to_string(p.phase))},
              {"trainable_groups", groups_to_json(p.trainable_groups)},
              {"base_lr", p.base_lr},
              {"momentum", p.momentum},
              {"grad_clip", p.grad_clip},
              {"encoder_layer_decay", p.encoder_layer_decay},
              {"steps", p.steps},
              {"batch_size", p.batch_size},
              {"merge_window", p.merge_window},
              {"position_mode", std::string(to_string(p.position_mode))},
              {"seed", p.seed}};
}

PhaseConfig phase_from_json(const json& j, const std::string& where, const TrainConfig& parent) {
  ObjectReader r(j, where);
  std::string name;
  if (r.find("phase") == nullptr) throw ConfigError(r.path("phase"), "required");
  r.read("phase", name);
  auto phase = parse_phase(name);
  if (!phase) throw ConfigError(r.path("phase"), "expected alignment, multitask or sft");
  PhaseConfig p;
  p.phase = *phase;
  p.trainable_groups = default_trainable_groups(*phase);
  p.merge_window = parent.merge_window_train;
  p.position_mode = parent.position_mode;
  if (const json* groups = r.find("trainable_groups")) {
    if (!groups->is_array()) throw ConfigError(r.path("trainable_groups"), "expected an array");
    p.trainable_groups.clear();
    for (const auto& g : *groups) {
      auto parsed = g.is_string() ? parse_param_group(g.get<std::string>()) : std::nullopt;
      if (!parsed) throw ConfigError(r.path("trainable_groups"), "unknown parameter group");
      p.trainable_groups.push_back(*parsed);
    }
  }
  r.read("base_lr", p.base_lr);
  r.read("momentum", p.momentum);
  r.read("grad_clip", p.grad_clip);
  r.read("encoder_layer_decay", p.encoder_layer_decay);
  r.read("steps", p.steps);
  r.read("batch_size", p.batch_size);
  r.read("merge_window", p.merge_window);
  r.read_mode("position_mode", p.position_mode);
  r.read("seed", p.seed);
  r.finish();
  return p;
}

}  // namespace

json to_json(const ModelConfig& cfg) {
  return json{{"encoder", to_json(cfg.encoder)}, {"decoder", to_json(cfg.decoder)}};
}

ModelConfig model_config_from_json(const json& j, const std::string& where) {
  ModelConfig cfg;
  ObjectReader r(j, where);
  if (const json* e = r.find("encoder")) {
    ObjectReader er(*e, r.path("encoder"));
    er.read("tile_px", cfg.encoder.tile_px);
    er.read("patch_px", cfg.encoder.patch_px);
    er.read("d_v", cfg.encoder.d_v);
    er.read("n_layers", cfg.encoder.n_layers);
    er.read("n_heads", cfg.encoder.n_heads);
    er.read("mlp_ratio", cfg.encoder.mlp_ratio);
    er.finish();
  }
  if (const json* d = r.find("decoder")) {
    ObjectReader dr(*d, r.path("decoder"));
    dr.read("d_m", cfg.decoder.d_m);
    dr.read("n_layers", cfg.decoder.n_layers);
    dr.read("n_heads", cfg.decoder.n_heads);
    dr.read("vocab", cfg.decoder.vocab);
    dr.read("mlp_ratio", cfg.decoder.mlp_ratio);
    dr.read("rope_base", cfg.decoder.rope_base);
    dr.finish();
  }
  r.finish();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + "." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
  }
  return cfg;
}

TrainConfig TrainConfig::defaults() {
  TrainConfig cfg;
  PhaseConfig align;
  align.phase = Phase::alignment;
  align.trainable_groups = default_trainable_groups(Phase::alignment);
  align.base_lr = 0.05;
  align.momentum = 0.9;
  align.grad_clip = 1.0;
  align.steps = 120;
  align.batch_size = 4;
  align.seed = 11;

  PhaseConfig multi = align;
  multi.phase = Phase::multitask;
  multi.trainable_groups = default_trainable_groups(Phase::multitask);
  multi.steps = 200;
  multi.seed = 12;

  PhaseConfig sft = align;
  sft.phase = Phase::sft;
  sft.trainable_groups = default_trainable_groups(Phase::sft);
  sft.encoder_layer_decay = 0.75;
  sft.steps = 150;
  sft.batch_size = 2;
  sft.seed = 13;

  cfg.phases = {align, multi, sft};
  return cfg;
}

void TrainConfig::validate() const {
  model.validate();
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  if (data.train_images < 0) throw ConfigError("data.train_images", "must be non-negative");
  if (data.train_videos < 0) throw ConfigError("data.train_videos", "must be non-negative");
  if (data.heldout_images < 0) throw ConfigError("data.heldout_images", "must be non-negative");
  if (data.heldout_videos < 0) throw ConfigError("data.heldout_videos", "must be non-negative");
  if (data.max_patches < 1) throw ConfigError("data.max_patches", "must be positive");
  if (merge_window_train < 1) throw ConfigError("merge_window_train", "must be positive");
  if (merge_window_eval < 1) throw ConfigError("merge_window_eval", "must be positive");
  if (phases.empty()) throw ConfigError("phases", "at least one phase is required");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const std::string at = "phases[" + std::to_string(i) + "]";
    phases[i].validate(at);
    if (i > 0 && static_cast<int>(phases[i].phase) <= static_cast<int>(phases[i - 1].phase)) {
      throw ConfigError(at + ".phase", "phases must run in order alignment -> multitask -> sft");
    }
    const Phase p = phases[i].phase;
    const bool needs_images = p != Phase::sft;
    const bool needs_videos = p != Phase::alignment;
    if (phases[i].steps > 0 && needs_images && data.train_images == 0) {
      throw ConfigError("data.train_images", "phase " + std::string(to_string(p)) + " needs image samples");
    }
    if (phases[i].steps > 0 && needs_videos && data.train_videos == 0) {
      throw ConfigError("data.train_videos", "phase " + std::string(to_string(p)) + " needs video samples");
    }
  }
}

json to_json(const TrainConfig& cfg) {
  json phases = json::array();
  for (const auto& p : cfg.phases) phases.push_back(to_json(p));
  return json{{"seed", cfg.seed},
              {"output_dir", cfg.output_dir},
              {"resume", cfg.resume},
              {"model", to_json(cfg.model)},
              {"data", to_json(cfg.data)},
              {"merge_window_train", cfg.merge_window_train},
              {"merge_window_eval", cfg.merge_window_eval},
              {"position_mode", std::string(to_string(cfg.position_mode))},
              {"phases", phases}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg = TrainConfig::defaults();
  ObjectReader r(j, "");
  r.read("seed", cfg.seed);
  r.read("output_dir", cfg.output_dir);
  r.read("resume", cfg.resume);
  if (const json* m = r.find("model")) cfg.model = model_config_from_json(*m, "model");
  if (const json* d = r.find("data")) {
    ObjectReader dr(*d, "data");
    dr.read("train_images", cfg.data.train_images);
    dr.read("train_videos", cfg.data.train_videos);
    dr.read("heldout_images", cfg.data.heldout_images);
    dr.read("heldout_videos", cfg.data.heldout_videos);
    dr.read("max_patches", cfg.data.max_patches);
    dr.finish();
  }
  r.read("merge_window_train", cfg.merge_window_train);
  r.read("merge_window_eval", cfg.merge_window_eval);
  r.read_mode("position_mode", cfg.position_mode);
  if (const json* phases = r.find("phases")) {
    if (!phases->is_array()) throw ConfigError("phases", "expected an array");
    cfg.phases.clear();
    for (std::size_t i = 0; i < phases->size(); ++i) {
      cfg.phases.push_back(phase_from_json((*phases)[i], "phases[" + std::to_string(i) + "]", cfg));
    }
  } else {
    for (auto& p : cfg.phases) {
      p.merge_window = cfg.merge_window_train;
      p.position_mode = cfg.position_mode;
    }
  }
  r.finish();
  cfg.validate();
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return train_config_from_json(read_json_file(path));
}

void EvalConfig::validate() const {
  if (heldout_images < 0) throw ConfigError("heldout_images", "must be non-negative");
  if (heldout_videos < 0) throw ConfigError("heldout_videos", "must be non-negative");
  if (max_patches < 1) throw ConfigError("max_patches", "must be positive");
  if (merge_windows_eval.empty()) throw ConfigError("merge_windows_eval", "at least one window is required");
  for (int w : merge_windows_eval) {
    if (w < 1) throw ConfigError("merge_windows_eval", "windows must be positive");
  }
  if (timing_repeats < 1) throw ConfigError("timing_repeats", "must be positive");
  if (warmup < 0) throw ConfigError("warmup", "must be non-negative");
}

json to_json(const EvalConfig& cfg) {
  return json{{"seed", cfg.seed},
              {"heldout_images", cfg.heldout_images},
              {"heldout_videos", cfg.heldout_videos},
              {"max_patches", cfg.max_patches},
              {"merge_windows_eval", cfg.merge_windows_eval},
              {"position_mode", std::string(to_string(cfg.position_mode))},
              {"instruction", cfg.instruction},
              {"timing_repeats", cfg.timing_repeats},
              {"warmup", cfg.warmup}};
}

EvalConfig eval_config_from_json(const json& j) {
  EvalConfig cfg;
  ObjectReader r(j, "");
  r.read("seed", cfg.seed);
  r.read("heldout_images", cfg.heldout_images);
  r.read("heldout_videos", cfg.heldout_videos);
  r.read("max_patches", cfg.max_patches);
  if (const json* w = r.find("merge_windows_eval")) {
    if (!w->is_array()) throw ConfigError("merge_windows_eval", "expected an array of integers");
    cfg.merge_windows_eval.clear();
    for (const auto& v : *w) {
      if (!v.is_number_integer()) throw ConfigError("merge_windows_eval", "expected an array of integers");
      cfg.merge_windows_eval.push_back(v.get<int>());
    }
  }
  r.read_mode("position_mode", cfg.position_mode);
  r.read("instruction", cfg.instruction);
  r.read("timing_repeats", cfg.timing_repeats);
  r.read("warmup", cfg.warmup);
  r.finish();
  cfg.validate();
  return cfg;
}

EvalConfig load_eval_config(const std::filesystem::path& path) {
  return eval_config_from_json(read_json_file(path));
}

void GradcheckConfig::validate() const {
  model.validate();
  if (views < 0) throw ConfigError("views", "must be non-negative");
  if (text_tokens < 2) throw ConfigError("text_tokens", "at least two text tokens are needed for a target");
  if (merge_window < 1) throw ConfigError("merge_window", "must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (coords_per_group < 1) throw ConfigError("coords_per_group", "must be positive");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance", "must be positive");
}

json to_json(const GradcheckConfig& cfg) {
  return json{{"seed", cfg.seed},
              {"model", to_json(cfg.model)},
              {"views", cfg.views},
              {"text_tokens", cfg.text_tokens},
              {"text_only", cfg.text_only},
              {"merge_window", cfg.merge_window},
              {"position_mode", std::string(to_string(cfg.position_mode))},
              {"epsilon", cfg.epsilon},
              {"coords_per_group", cfg.coords_per_group},
              {"tolerance", cfg.tolerance}};
}

GradcheckConfig gradcheck_config_from_json(const json& j) {
  GradcheckConfig cfg;
  ObjectReader r(j, "");
  r.read("seed", cfg.seed);
  if (const json* m = r.find("model")) cfg.model = model_config_from_json(*m, "model");
  r.read("views", cfg.views);
  r.read("text_tokens", cfg.text_tokens);
  r.read("text_only", cfg.text_only);
  r.read("merge_window", cfg.merge_window);
  r.read_mode("position_mode", cfg.position_mode);
  r.read("epsilon", cfg.epsilon);
  r.read("coords_per_group", cfg.coords_per_group);
  r.read("tolerance", cfg.tolerance);
  r.finish();
  cfg.validate();
  return cfg;
}

GradcheckConfig load_gradcheck_config(const std::filesystem::path& path) {
  return gradcheck_config_from_json(read_json_file(path));
}

}  // namespace minivlm
