// Acceptance gate: one PASS/FAIL line per primary criterion.
//
//   minivlm_acceptance <path to minivlm CLI> <configs dir> <work dir>
//
// The learning and determinism criteria drive the real `minivlm train`
// command; everything else calls the library directly.

#include "minivlm/budget.hpp"
#include "minivlm/checkpoint.hpp"
#include "minivlm/config.hpp"
#include "minivlm/driver.hpp"
#include "minivlm/glhr.hpp"
#include "minivlm/gradcheck.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace minivlm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (limit_seconds > 0 && secs > limit_seconds) {
    o.pass = false;
    o.detail += "; over time limit " + std::to_string(limit_seconds) + " s";
  }
  if (!o.pass) ++failures;
  std::ostringstream line;
  line.precision(4);
  line << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << secs << " s)  " << o.detail;
  std::cout << line.str() << std::endl;
}

std::string run_capture(const std::string& cmd, int& status) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("cannot run " + cmd);
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  status = pclose(pipe);
  return out;
}

std::vector<unsigned char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

Example media_example(int views, std::uint64_t seed, int tile) {
  Rng rng(seed);
  MediaPart media;
  for (int v = 0; v < views; ++v) {
    RasterImage img({tile, tile});
    for (double& p : img.pixels()) p = uniform01(rng);
    media.views.push_back(std::move(img));
  }
  Example ex;
  ex.parts.emplace_back(TextPart{{1, 3, 4, 5}, false});
  ex.parts.emplace_back(std::move(media));
  ex.parts.emplace_back(TextPart{{1, 8, 16, 24, 2}, true});
  return ex;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: minivlm_acceptance <minivlm cli> <configs dir> <work dir>\n";
    return 1;
  }
  const std::string cli = argv[1];
  const fs::path configs = argv[2];
  const fs::path work = argv[3];
  fs::create_directories(work);

  criterion("grid arithmetic", 1.0, [] {
    const bool five = plan_split({672, 672}).view_count() == 5;
    Rng rng(2024);
    int lo = 99, hi = 0;
    for (int i = 0; i < 20000; ++i) {
      const ImageDims d{1 + static_cast<int>(uniform_index(rng, 4000)), 1 + static_cast<int>(uniform_index(rng, 4000))};
      const int v = plan_split(d).view_count();
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return Outcome{five && lo >= 2 && hi <= 13,
                   "672x672 -> " + std::to_string(plan_split({672, 672}).view_count()) +
                       " views; 20000 random dims -> views in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"};
  });

  criterion("position-id accounting", 1.0, [] {
    BudgetInput video;
    video.frames = 30;
    const BudgetReport v = compute_budget(video);
    long long nlo = 1LL << 40, nhi = 0, slo = 1LL << 40, shi = 0;
    for (int h = 1; h <= 4000; h += 37) {
      for (int w = 1; w <= 4000; w += 41) {
        BudgetInput img;
        img.dims = ImageDims{h, w};
        const BudgetReport r = compute_budget(img);
        nlo = std::min(nlo, r.naive_position_ids);
        nhi = std::max(nhi, r.naive_position_ids);
        slo = std::min(slo, r.shared_position_ids);
        shi = std::max(shi, r.shared_position_ids);
      }
    }
    const bool ok = v.naive_position_ids == 4320 && v.shared_position_ids == 30 && nlo == 288 && nhi == 1872 &&
                    slo == 2 && shi == 13;
    return Outcome{ok, "30 frames: naive " + std::to_string(v.naive_position_ids) + ", shared " +
                           std::to_string(v.shared_position_ids) + "; image naive " + std::to_string(nlo) + "-" +
                           std::to_string(nhi) + ", shared " + std::to_string(slo) + "-" + std::to_string(shi)};
  });

  criterion("token counts", 0, [] {
    ModelConfig cfg;
    const ModelParams p = ModelParams::init(cfg, 1);
    const TokenGrid g = encode_view(RasterImage({336, 336}), p.encoder, cfg.encoder);
    std::string counts;
    bool ok = g.token_count() == 576;
    const std::pair<int, long long> expected[] = {{1, 576}, {3, 64}, {4, 36}, {6, 16}, {8, 9}};
    for (auto [w, n] : expected) {
      const TokenGrid m = merge(g, {w});
      ok = ok && m.token_count() == n && merged_token_count(24, w) == n;
      counts += (counts.empty() ? "" : ", ") + std::to_string(w) + ":" + std::to_string(m.token_count());
    }
    return Outcome{ok, "raw " + std::to_string(g.token_count()) + "; merged {" + counts + "}"};
  });

  criterion("expert-collapse equivalence", 10.0, [] {
    DecoderConfig cfg;
    Rng rng(5);
    ExpertLayerParams p = ExpertLayerParams::init(cfg, rng);
    // Give the text route non-trivial biases, then collapse the expert onto it.
    for (LinearParams* l : {&p.text_qkv.q, &p.text_qkv.k, &p.text_qkv.v}) {
      for (Eigen::Index i = 0; i < l->b.size(); ++i) l->b.data()[i] = uniform(rng, -0.5, 0.5);
    }
    p.copy_text_qkv_to_visual();
    const SequenceLayout layout = assign_positions(
        make_layout({{SegmentKind::text, 5}, {SegmentKind::visual_frame, 144}, {SegmentKind::visual_frame, 144},
                     {SegmentKind::text, 12}}),
        PositionMode::shared_fpid);
    Mat x(layout.total_tokens(), cfg.d_m);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -1, 1);
    BlockOptions opt;
    opt.n_heads = cfg.n_heads;
    opt.causal = true;
    opt.positions = layout.position_ids;
    opt.rope_base = cfg.rope_base;
    const Mat ve = ve_attention_forward(x, layout, p, cfg);
    const Mat base = block_forward(x, BlockWeights{p.ln1, p.text_qkv, nullptr, p.attn_out, p.ln2, p.ffn}, opt);
    const double diff = (ve - base).cwiseAbs().maxCoeff();
    return Outcome{diff <= 1e-12, "max abs diff " + fmt(diff) + " (limit 1e-12)"};
  });

  criterion("routing isolation", 0, [] {
    ModelConfig cfg;
    ModelParams p = ModelParams::init(cfg, 7);
    Example ex;
    ex.parts.emplace_back(TextPart{{1, 3, 4, 6}, false});
    ex.parts.emplace_back(TextPart{{1, 10, 17, 30, 40, 50, 2}, true});
    ModelParams grad = ModelParams::zeros_like(p);
    const LossResult a = model_loss(p, cfg, ex, {}, &grad);
    bool zero = true;
    for (const auto& t : tensors(static_cast<const ModelParams&>(grad))) {
      if (t.group == ParamGroup::visual_experts) zero = zero && (t.value->array() == 0.0).all();
    }
    for (auto& l : p.decoder.layers) {
      for (LinearParams* lp : {&l.visual_qkv.q, &l.visual_qkv.k, &l.visual_qkv.v}) {
        lp->w.setConstant(123.0);
        lp->b.setConstant(-7.0);
      }
    }
    const LossResult b = model_loss(p, cfg, ex, {});
    const bool same = std::memcmp(&a.loss, &b.loss, sizeof(double)) == 0;
    return Outcome{zero && same, std::string("visual_qkv gradients ") + (zero ? "all exactly 0" : "NONZERO") +
                                     "; loss " + (same ? "bitwise invariant" : "CHANGED") + " under garbage visual_qkv"};
  });

  criterion("gradient verification", 300.0, [] {
    const GradCheckReport r = run_gradcheck(GradcheckConfig{});
    std::string detail;
    for (const auto& g : r.groups) {
      detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(g.group)) + " " + fmt(g.max_rel_error) +
                " (" + std::to_string(g.coords.size()) + ")";
    }
    return Outcome{r.passed(), "max rel error per group: " + detail + " (limit 1e-3)"};
  });

  criterion("merger speedup direction", 120.0, [] {
    ModelConfig cfg;
    const ModelParams p = ModelParams::init(cfg, 9);
    const Example ex = media_example(10, 3, cfg.encoder.tile_px);
    const double t1 = median(time_forward(p, cfg, ex, {1, PositionMode::shared_fpid}, 5, 1));
    const double t3 = median(time_forward(p, cfg, ex, {3, PositionMode::shared_fpid}, 5, 1));
    const double speedup = t1 / t3;
    return Outcome{speedup >= 1.2, "10 views, median forward w=1 " + fmt(t1) + " s, w=3 " + fmt(t3) +
                                       " s, speedup " + fmt(speedup) + "x (need >= 1.2x)"};
  });

  // One default three-phase run through the CLI feeds the learning and
  // dynamic-pooling criteria.
  const fs::path run_dir = work / "default_run";
  fs::remove_all(run_dir);
  json train_out;
  double train_seconds = 0.0;
  std::string train_error;
  {
    const auto t0 = Clock::now();
    int status = 0;
    const std::string out = run_capture("\"" + cli + "\" train --config \"" + (configs / "train_default.json").string() +
                                            "\" --output-dir \"" + run_dir.string() + "\" 2>/dev/null",
                                        status);
    train_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (status != 0) {
      train_error = "minivlm train exited with status " + std::to_string(status);
    } else {
      train_out = json::parse(out);
    }
  }

  criterion("dynamic pooling contract", 0, [&] {
    if (!train_error.empty()) return Outcome{false, train_error};
    const Checkpoint ck = load_checkpoint(run_dir / "checkpoint_3_sft.mmda");
    EvalConfig ec;
    ec.merge_windows_eval = {3};
    ec.timing_repeats = 1;
    ec.warmup = 0;
    const EvalMetrics m = evaluate(ck, ec);
    return Outcome{m.windows.size() == 1 && m.windows[0].targets > 0,
                   "trained at w=2 (" + std::to_string(ck.params.decoder.layers.size()) +
                       "-layer decoder), evaluated at w=3 without shape errors: held-out caption token accuracy " +
                       fmt(m.windows[0].heldout_accuracy) + " (train run held-out at w=3: " +
                       fmt(train_out.value("heldout_accuracy_eval", 0.0)) + "; informational)"};
  });

  criterion("learning smoke test", 0, [&] {
    if (!train_error.empty()) return Outcome{false, train_error};
    const double initial = train_out.at("initial_loss");
    const double final_loss = train_out.at("final_smoothed_loss");
    const double reduction = 1.0 - final_loss / initial;
    const bool ok = reduction >= 0.5 && train_seconds <= 15 * 60 && train_out.at("checkpoints").size() == 3;
    return Outcome{ok, "loss " + fmt(initial) + " -> " + fmt(final_loss) + " (smoothed), reduction " +
                           fmt(100 * reduction) + "% (need >= 50%); 3 phases in " + fmt(train_seconds) +
                           " s (limit 900 s)"};
  });

  criterion("determinism", 0, [&] {
    TrainConfig cfg = load_train_config(configs / "train_default.json");
    // Same schedule shape at a fraction of the length; the default model is kept.
    cfg.data = {8, 8, 2, 2, 12};
    for (auto& p : cfg.phases) {
      p.steps = 4;
      p.batch_size = 2;
    }
    std::vector<std::vector<unsigned char>> finals;
    for (const char* tag : {"det_a", "det_b"}) {
      const fs::path dir = work / tag;
      fs::remove_all(dir);
      fs::create_directories(dir);
      cfg.output_dir = dir.string();
      std::ofstream(dir / "config.json") << to_json(cfg).dump(2);
      int status = 0;
      run_capture("\"" + cli + "\" train --config \"" + (dir / "config.json").string() + "\" >/dev/null 2>&1", status);
      if (status != 0) return Outcome{false, "minivlm train failed"};
      finals.push_back(file_bytes(dir / "checkpoint_3_sft.mmda"));
    }
    const bool same = finals[0] == finals[1];
    return Outcome{same, "two `minivlm train` runs (default model, 3 phases x 4 steps): final checkpoints " +
                             std::string(same ? "bitwise identical" : "DIFFER") + " (" +
                             std::to_string(finals[0].size()) + " bytes)"};
  });

  std::cout << (failures == 0 ? "ALL PRIMARY CRITERIA PASSED" : std::to_string(failures) + " CRITERIA FAILED")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
