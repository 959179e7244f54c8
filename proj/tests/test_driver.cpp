#include "doctest.h"

#include "support.hpp"

#include "minivlm/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace minivlm;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

std::vector<unsigned char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("train writes one checkpoint per phase and a JSONL report") {
  const fs::path dir = fresh_dir("minivlm_test_train");
  const TrainConfig cfg = testing::small_train_config(dir.string());
  const TrainOutcome out = train(cfg);
  REQUIRE(out.checkpoints.size() == 3);
  for (const auto& p : out.checkpoints) CHECK(fs::exists(p));
  CHECK(out.reports.size() == 3);
  std::ifstream report(dir / "train_report.jsonl");
  int steps = 0, phases = 0, finals = 0;
  for (std::string line; std::getline(report, line);) {
    const json j = json::parse(line);
    const std::string kind = j.at("record");
    steps += kind == "step";
    phases += kind == "phase";
    finals += kind == "final";
  }
  CHECK(steps == 9);
  CHECK(phases == 3);
  CHECK(finals == 1);

  // Identical config: bitwise-identical final checkpoint.
  const fs::path dir2 = fresh_dir("minivlm_test_train2");
  TrainConfig again = cfg;
  again.output_dir = dir2.string();
  train(again);
  CHECK(file_bytes(dir / "checkpoint_3_sft.mmda") == file_bytes(dir2 / "checkpoint_3_sft.mmda"));

  // Resume after losing the last checkpoint reproduces it.
  fs::remove(dir2 / "checkpoint_3_sft.mmda");
  again.resume = true;
  const TrainOutcome resumed = train(again);
  CHECK(resumed.resumed_phases == 2);
  CHECK(resumed.reports.size() == 1);
  CHECK(file_bytes(dir / "checkpoint_3_sft.mmda") == file_bytes(dir2 / "checkpoint_3_sft.mmda"));

  // Resuming with a different model is refused.
  TrainConfig wrong = again;
  wrong.model.decoder.d_m = 48;
  CHECK_THROWS_AS(train(wrong), ConfigError);
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("evaluate reports per-window token counts and is repeatable") {
  ModelConfig model;  // default encoder geometry: 24x24 tokens per view
  model.decoder.d_m = 32;
  model.decoder.n_layers = 1;
  model.decoder.vocab = 64;
  const Checkpoint ck{model, ModelParams::init(model, 3)};
  EvalConfig cfg;
  cfg.heldout_images = 1;
  cfg.heldout_videos = 1;
  cfg.merge_windows_eval = {1, 3};
  const EvalMetrics a = evaluate(ck, cfg);
  REQUIRE(a.windows.size() == 2);
  CHECK(a.windows[0].visual_tokens_per_view == 576);
  CHECK(a.windows[1].visual_tokens_per_view == 64);
  CHECK(a.windows[0].forward_seconds.size() == 5);
  CHECK(a.windows[0].median_forward_seconds > 0.0);
  CHECK(a.windows[0].timing_tokens > a.windows[1].timing_tokens);
  const EvalMetrics b = evaluate(ck, cfg);
  CHECK(a.windows[0].heldout_accuracy == b.windows[0].heldout_accuracy);
  CHECK(a.windows[1].heldout_accuracy == b.windows[1].heldout_accuracy);

  EvalConfig empty = cfg;
  empty.heldout_images = 0;
  empty.heldout_videos = 0;
  CHECK_THROWS_AS(evaluate(ck, empty), ContractError);
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), ContractError);
}
