// minivlm: budget | train | eval | gradcheck
//
// JSON results go to stdout (or --output); diagnostics go to stderr.
// Exit codes: 0 success, 1 usage or invalid configuration, 2 runtime failure,
// 3 verification failure (gradcheck).

#include "minivlm/budget.hpp"
#include "minivlm/checkpoint.hpp"
#include "minivlm/config.hpp"
#include "minivlm/driver.hpp"
#include "minivlm/errors.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <regex>

using namespace minivlm;

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kVerification = 3;

void emit(const json& j, const std::string& output) {
  if (output.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(output);
  if (!f) throw std::runtime_error("cannot write " + output);
  f << j.dump(2) << '\n';
}

ImageDims parse_dims(const std::string& s) {
  static const std::regex re(R"((\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw CLI::ValidationError("--dims", "expected HxW, got " + s);
  return ImageDims{std::stoi(m[1]), std::stoi(m[2])};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Miniature vision-language pipeline: token budgets, training, evaluation, gradient checks"};
  app.require_subcommand(1);

  // budget
  auto* budget = app.add_subcommand("budget", "Token and position-id budget for one image or video");
  std::string dims_arg;
  int frames = 0;
  std::string strategy_arg = "ds12";
  BudgetInput bin;
  int max_patches = 0;
  auto* dims_opt = budget->add_option("--dims", dims_arg, "Image size HxW in pixels");
  auto* frames_opt = budget->add_option("--frames", frames, "Video frame count")->check(CLI::PositiveNumber);
  dims_opt->excludes(frames_opt);
  const std::map<std::string, SplitStrategy> strategies{{"resize", SplitStrategy::resize},
                                                         {"uniform4", SplitStrategy::uniform4},
                                                         {"ds4", SplitStrategy::ds4},
                                                         {"ds12", SplitStrategy::ds12}};
  budget->add_option("--strategy", strategy_arg, "resize | uniform4 | ds4 | ds12")
      ->check(CLI::IsMember({"resize", "uniform4", "ds4", "ds12"}));
  budget->add_option("--tile", bin.tile, "Tile side in pixels")->check(CLI::PositiveNumber);
  budget->add_option("--patch", bin.patch, "Encoder patch side in pixels")->check(CLI::PositiveNumber);
  budget->add_option("--max-patches", max_patches, "Override the tile cap of ds strategies")
      ->check(CLI::PositiveNumber);
  budget->add_option("--window", bin.window, "Merger window")->check(CLI::PositiveNumber);
  budget->add_option("--text-tokens", bin.text_tokens, "Text tokens in the sequence")->check(CLI::NonNegativeNumber);

  // train
  auto* train_cmd = app.add_subcommand("train", "Run the configured training phases");
  std::string train_config;
  std::string output_dir;
  bool resume = false;
  train_cmd->add_option("--config", train_config, "Train config JSON (defaults when omitted)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--output-dir", output_dir, "Override output_dir");
  train_cmd->add_flag("--resume", resume, "Continue from the latest phase checkpoint in output_dir");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Held-out accuracy and forward timing of a checkpoint");
  std::string checkpoint;
  std::string eval_config;
  std::vector<int> windows;
  std::string eval_output;
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--config", eval_config, "Eval config JSON (defaults when omitted)")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--merge-window-eval", windows, "Override merge_windows_eval")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--output", eval_output, "Write the JSON report here instead of stdout");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter group");
  std::string grad_config;
  bool text_only = false;
  std::string grad_output;
  grad_cmd->add_option("--config", grad_config, "Gradcheck config JSON (defaults when omitted)")
      ->check(CLI::ExistingFile);
  grad_cmd->add_flag("--text-only", text_only, "Use a text-only instance");
  grad_cmd->add_option("--output", grad_output, "Write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (budget->parsed()) {
      if (!dims_arg.empty()) bin.dims = parse_dims(dims_arg);
      if (*frames_opt) bin.frames = frames;
      if (!bin.dims && !bin.frames) throw CLI::ValidationError("budget", "one of --dims or --frames is required");
      bin.strategy = strategies.at(strategy_arg);
      if (max_patches > 0) bin.max_patches = max_patches;
      emit(to_json(compute_budget(bin)), "");
      return 0;
    }
    if (train_cmd->parsed()) {
      TrainConfig cfg = train_config.empty() ? TrainConfig::defaults() : load_train_config(train_config);
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      if (resume) cfg.resume = true;
      const TrainOutcome out = train(cfg, &std::cerr);
      json checkpoints = json::array();
      for (const auto& p : out.checkpoints) checkpoints.push_back(p.string());
      emit(json{{"output_dir", cfg.output_dir},
                {"checkpoints", checkpoints},
                {"resumed_phases", out.resumed_phases},
                {"phases_run", out.reports.size()},
                {"initial_loss", out.initial_loss},
                {"final_smoothed_loss", out.final_smoothed_loss},
                {"merge_window_eval", cfg.merge_window_eval},
                {"heldout_accuracy_eval", out.eval_accuracy}},
           "");
      return 0;
    }
    if (eval_cmd->parsed()) {
      EvalConfig cfg = eval_config.empty() ? EvalConfig{} : load_eval_config(eval_config);
      if (!windows.empty()) cfg.merge_windows_eval = windows;
      const Checkpoint ck = load_checkpoint(checkpoint);
      json report = to_json(evaluate(ck, cfg));
      report["checkpoint"] = checkpoint;
      emit(report, eval_output);
      return 0;
    }
    if (grad_cmd->parsed()) {
      GradcheckConfig cfg = grad_config.empty() ? GradcheckConfig{} : load_gradcheck_config(grad_config);
      if (text_only) cfg.text_only = true;
      const GradCheckReport r = run_gradcheck(cfg);
      emit(to_json(r), grad_output);
      if (!r.passed()) {
        std::cerr << "gradcheck: FAILED" << std::endl;
        return kVerification;
      }
      return 0;
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kUsage;
  } catch (const ContractError& e) {
    std::cerr << "invalid input: " << e.what() << std::endl;
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kRuntime;
  }
  return kUsage;
}
