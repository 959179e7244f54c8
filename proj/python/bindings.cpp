// Python bindings. Structured results cross the boundary as JSON text and are
// decoded by the package's __init__.py; tensors travel as numpy arrays.

#include "minivlm/budget.hpp"
#include "minivlm/checkpoint.hpp"
#include "minivlm/config.hpp"
#include "minivlm/driver.hpp"
#include "minivlm/errors.hpp"
#include "minivlm/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace minivlm;

namespace {

SegmentKind parse_kind(const std::string& s) {
  if (s == "text") return SegmentKind::text;
  if (s == "visual" || s == "visual_frame") return SegmentKind::visual_frame;
  throw ContractError("segment kind must be 'text' or 'visual', got '" + s + "'");
}

PositionMode mode_of(const std::string& s) {
  auto m = parse_position_mode(s);
  if (!m) throw ContractError("position mode must be 'naive' or 'shared_fpid'");
  return *m;
}

SequenceLayout layout_of(const std::vector<std::pair<std::string, std::int64_t>>& segments) {
  std::vector<Segment> entries;
  for (const auto& [kind, count] : segments) entries.push_back({parse_kind(kind), count});
  return make_layout(std::move(entries));
}

py::array_t<double> image_array(const RasterImage& img) {
  py::array_t<double> out({img.height(), img.width(), RasterImage::kChannels});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Miniature vision-language pipeline (C++ core)";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  m.def(
      "compute_grid",
      [](int h, int w, int tile, int max_patches) {
        const GridShape g = compute_grid({h, w}, tile, max_patches);
        return std::make_pair(g.p_h, g.p_w);
      },
      py::arg("h"), py::arg("w"), py::arg("tile") = kDefaultTile, py::arg("max_patches") = kDefaultMaxPatches);

  m.def(
      "split_image",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> img, int tile, int max_patches) {
        if (img.ndim() != 3 || img.shape(2) != 3) throw ContractError("expected an (h, w, 3) array");
        const ImageDims dims{static_cast<int>(img.shape(0)), static_cast<int>(img.shape(1))};
        RasterImage raster(dims, std::vector<double>(img.data(), img.data() + img.size()));
        py::list views;
        for (const auto& v : apply_split(raster, plan_split(dims, tile, max_patches))) views.append(image_array(v));
        return views;
      },
      py::arg("image"), py::arg("tile") = kDefaultTile, py::arg("max_patches") = kDefaultMaxPatches);

  m.def("merged_token_count", &merged_token_count, py::arg("g"), py::arg("w"));

  m.def(
      "merge",
      [](const Mat& features, int g_h, int g_w, int window) {
        return merge(TokenGrid{g_h, g_w, features}, {window}).features;
      },
      py::arg("features"), py::arg("g_h"), py::arg("g_w"), py::arg("window"));

  m.def(
      "assign_positions",
      [](const std::vector<std::pair<std::string, std::int64_t>>& segments, const std::string& mode) {
        return assign_positions(layout_of(segments), mode_of(mode)).position_ids;
      },
      py::arg("segments"), py::arg("mode") = "shared_fpid");

  m.def(
      "count_positions",
      [](const std::vector<std::pair<std::string, std::int64_t>>& segments, const std::string& mode) {
        return count_positions(layout_of(segments), mode_of(mode));
      },
      py::arg("segments"), py::arg("mode") = "shared_fpid");

  m.def(
      "_budget",
      [](std::optional<std::pair<int, int>> dims, std::optional<int> frames, const std::string& strategy, int tile,
         int patch, std::optional<int> max_patches, int window, int text_tokens) {
        BudgetInput in;
        if (dims) in.dims = ImageDims{dims->first, dims->second};
        in.frames = frames;
        auto s = parse_split_strategy(strategy);
        if (!s) throw ContractError("unknown strategy '" + strategy + "'");
        in.strategy = *s;
        in.tile = tile;
        in.patch = patch;
        in.max_patches = max_patches;
        in.window = window;
        in.text_tokens = text_tokens;
        return to_json(compute_budget(in)).dump();
      },
      py::arg("dims") = py::none(), py::arg("frames") = py::none(), py::arg("strategy") = "ds12",
      py::arg("tile") = kDefaultTile, py::arg("patch") = 14, py::arg("max_patches") = py::none(),
      py::arg("window") = 2, py::arg("text_tokens") = 0);

  m.def(
      "generate_sample",
      [](std::uint64_t seed, const std::string& kind) {
        if (kind != "image" && kind != "video") throw ContractError("kind must be 'image' or 'video'");
        const auto s = synthetic::generate_sample(
            seed, kind == "image" ? synthetic::SampleKind::image_caption : synthetic::SampleKind::video_caption);
        py::list media;
        for (const auto& img : s.media) media.append(image_array(img));
        py::dict out;
        out["caption"] = s.caption;
        out["description"] = synthetic::describe(s.scene);
        out["media"] = media;
        return out;
      },
      py::arg("seed"), py::arg("kind") = "image");

  m.def(
      "_load_checkpoint",
      [](const std::string& path) {
        const Checkpoint ck = load_checkpoint(path);
        py::dict tensors_out;
        for (const auto& t : tensors(ck.params)) tensors_out[py::str(t.name)] = *t.value;
        return std::make_pair(to_json(ck.config).dump(), tensors_out);
      },
      py::arg("path"));

  m.def(
      "_gradcheck",
      [](const std::string& config_json) {
        const GradcheckConfig cfg = gradcheck_config_from_json(json::parse(config_json));
        py::gil_scoped_release release;
        return to_json(run_gradcheck(cfg)).dump();
      },
      py::arg("config_json"));

  m.def(
      "_evaluate",
      [](const std::string& checkpoint, const std::string& config_json) {
        const EvalConfig cfg = eval_config_from_json(json::parse(config_json));
        py::gil_scoped_release release;
        return to_json(evaluate(load_checkpoint(checkpoint), cfg)).dump();
      },
      py::arg("checkpoint"), py::arg("config_json"));

  m.def(
      "_train",
      [](const std::string& config_json) {
        const TrainConfig cfg = train_config_from_json(json::parse(config_json));
        py::gil_scoped_release release;
        const TrainOutcome out = train(cfg);
        json ckpts = json::array();
        for (const auto& p : out.checkpoints) ckpts.push_back(p.string());
        return json{{"checkpoints", ckpts},
                    {"initial_loss", out.initial_loss},
                    {"final_smoothed_loss", out.final_smoothed_loss},
                    {"heldout_accuracy_eval", out.eval_accuracy},
                    {"resumed_phases", out.resumed_phases}}
            .dump();
      },
      py::arg("config_json"));

  m.def("_default_train_config", [] { return to_json(TrainConfig::defaults()).dump(); });
}
