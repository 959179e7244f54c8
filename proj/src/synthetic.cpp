#include "minivlm/synthetic.hpp"

#include "minivlm/errors.hpp"
#include "minivlm/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace minivlm::synthetic {

namespace {

constexpr std::array<std::array<double, 3>, kColors> kPalette = {{
    {0.90, 0.10, 0.10},  // red
    {0.10, 0.80, 0.20},  // green
    {0.15, 0.25, 0.95},  // blue
    {0.95, 0.90, 0.10},  // yellow
    {0.85, 0.15, 0.85},  // magenta
    {0.10, 0.85, 0.90},  // cyan
}};
constexpr std::array<const char*, kColors> kColorNames = {"red", "green", "blue", "yellow", "magenta", "cyan"};
constexpr std::array<const char*, kShapes> kShapeNames = {"square", "circle", "triangle"};
constexpr std::array<const char*, kDirections> kDirectionNames = {"up", "down", "left", "right"};
constexpr std::array<std::array<int, 2>, kDirections> kDirectionStep = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
constexpr double kBackground = 0.08;

bool inside_shape(int shape, double dy, double dx, double radius) {
  switch (shape) {
    case 0: return std::abs(dy) <= radius && std::abs(dx) <= radius;
    case 1: return dy * dy + dx * dx <= radius * radius;
    default: {
      // Upward triangle: apex at -radius, base at +radius.
      if (dy < -radius || dy > radius) return false;
      const double half_width = (dy + radius) * 0.5;
      return std::abs(dx) <= half_width;
    }
  }
}

/// Draws `shape` centred at (cy, cx) with wrap-around on both axes.
void draw_shape(RasterImage& img, int shape, int color, double cy, double cx, double radius) {
  const int h = img.height();
  const int w = img.width();
  const int r = static_cast<int>(std::ceil(radius));
  const auto& rgb = kPalette[static_cast<std::size_t>(color)];
  for (int oy = -r; oy <= r; ++oy) {
    for (int ox = -r; ox <= r; ++ox) {
      const int y = static_cast<int>(std::floor(cy)) + oy;
      const int x = static_cast<int>(std::floor(cx)) + ox;
      if (!inside_shape(shape, y + 0.5 - cy, x + 0.5 - cx, radius)) continue;
      const int wy = ((y % h) + h) % h;
      const int wx = ((x % w) + w) % w;
      for (int c = 0; c < 3; ++c) img.at(wy, wx, c) = rgb[static_cast<std::size_t>(c)];
    }
  }
}

RasterImage blank(ImageDims dims) {
  RasterImage img(dims);
  for (double& v : img.pixels()) v = kBackground;
  return img;
}

}  // namespace

std::vector<int> caption_for(const Scene& scene) {
  std::vector<int> out{token::bos};
  if (scene.kind == SampleKind::image_caption) {
    for (const auto& s : scene.shapes) {
      out.push_back(token::color_base + s.color);
      out.push_back(token::shape_base + s.shape);
      out.push_back(token::cell_base + s.cell);
    }
  } else {
    const auto& s = scene.shapes.at(0);
    out.push_back(token::color_base + s.color);
    out.push_back(token::shape_base + s.shape);
    out.push_back(token::cell_base + s.cell);
    out.push_back(token::direction_base + scene.motion.direction);
    out.push_back(token::frames_base + scene.motion.frames);
  }
  out.push_back(token::eos);
  return out;
}

std::optional<Scene> decode_caption(const std::vector<int>& caption) {
  auto in_range = [](int tok, int base, int count) { return tok >= base && tok < base + count; };
  if (caption.size() < 2 || caption.front() != token::bos || caption.back() != token::eos) {
    return std::nullopt;
  }
  const std::vector<int> body(caption.begin() + 1, caption.end() - 1);
  auto read_shape = [&](std::size_t i) -> std::optional<PlacedShape> {
    if (!in_range(body[i], token::color_base, kColors) || !in_range(body[i + 1], token::shape_base, kShapes) ||
        !in_range(body[i + 2], token::cell_base, kCells)) {
      return std::nullopt;
    }
    return PlacedShape{body[i] - token::color_base, body[i + 1] - token::shape_base,
                       body[i + 2] - token::cell_base};
  };
  Scene scene;
  if (body.size() == 5 && in_range(body[3], token::direction_base, kDirections)) {
    auto s = read_shape(0);
    if (!s || !in_range(body[4], token::frames_base + kMinFrames, kMaxFrames - kMinFrames + 1)) {
      return std::nullopt;
    }
    scene.kind = SampleKind::video_caption;
    scene.shapes = {*s};
    scene.motion = Motion{body[3] - token::direction_base, body[4] - token::frames_base};
    return scene;
  }
  if (body.empty() || body.size() % 3 != 0 || body.size() / 3 > kMaxShapes) return std::nullopt;
  scene.kind = SampleKind::image_caption;
  for (std::size_t i = 0; i < body.size(); i += 3) {
    auto s = read_shape(i);
    if (!s) return std::nullopt;
    if (!scene.shapes.empty() && s->cell <= scene.shapes.back().cell) return std::nullopt;
    scene.shapes.push_back(*s);
  }
  return scene;
}

std::string describe(const Scene& scene) {
  std::string out;
  for (const auto& s : scene.shapes) {
    if (!out.empty()) out += ", ";
    out += std::string(kColorNames[static_cast<std::size_t>(s.color)]) + " " +
           kShapeNames[static_cast<std::size_t>(s.shape)] + " at cell " + std::to_string(s.cell);
  }
  if (scene.kind == SampleKind::video_caption) {
    out += " moving " + std::string(kDirectionNames[static_cast<std::size_t>(scene.motion.direction)]) +
           " over " + std::to_string(scene.motion.frames) + " frames";
  }
  return out;
}

SyntheticSample generate_sample(std::uint64_t seed, SampleKind kind, const GeneratorOptions& opt) {
  if (opt.image_canvases.empty()) throw ContractError("generate_sample: no image canvases");
  Rng rng(seed);
  SyntheticSample sample;
  sample.kind = kind;
  sample.scene.kind = kind;
  auto pick = [&](int n) { return static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n))); };

  if (kind == SampleKind::image_caption) {
    const ImageDims dims = opt.image_canvases[static_cast<std::size_t>(pick(static_cast<int>(opt.image_canvases.size())))];
    const int count = 1 + pick(kMaxShapes);
    std::array<int, kCells> cells{};
    for (int i = 0; i < kCells; ++i) cells[static_cast<std::size_t>(i)] = i;
    // Partial Fisher-Yates: the first `count` cells are a uniform draw without replacement.
    for (int i = 0; i < count; ++i) {
      const int j = i + pick(kCells - i);
      std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < count; ++i) {
      sample.scene.shapes.push_back(PlacedShape{pick(kColors), pick(kShapes), cells[static_cast<std::size_t>(i)]});
    }
    std::sort(sample.scene.shapes.begin(), sample.scene.shapes.end(),
              [](const PlacedShape& a, const PlacedShape& b) { return a.cell < b.cell; });
    RasterImage img = blank(dims);
    const double cell_h = static_cast<double>(dims.h_px) / kLatticeSide;
    const double cell_w = static_cast<double>(dims.w_px) / kLatticeSide;
    const double radius = 0.3 * std::min(cell_h, cell_w);
    for (const auto& s : sample.scene.shapes) {
      const double cy = (s.cell / kLatticeSide + 0.5) * cell_h;
      const double cx = (s.cell % kLatticeSide + 0.5) * cell_w;
      draw_shape(img, s.shape, s.color, cy, cx, radius);
    }
    sample.media.push_back(std::move(img));
  } else {
    const PlacedShape s{pick(kColors), pick(kShapes), pick(kCells)};
    const Motion motion{pick(kDirections), kMinFrames + pick(kMaxFrames - kMinFrames + 1)};
    sample.scene.shapes = {s};
    sample.scene.motion = motion;
    const ImageDims dims{opt.frame_px, opt.frame_px};
    const double cell = static_cast<double>(opt.frame_px) / kLatticeSide;
    const double radius = 0.3 * cell;
    const auto& step = kDirectionStep[static_cast<std::size_t>(motion.direction)];
    for (int f = 0; f < motion.frames; ++f) {
      RasterImage frame = blank(dims);
      const double cy = (s.cell / kLatticeSide + 0.5) * cell + f * step[0] * opt.motion_step_px;
      const double cx = (s.cell % kLatticeSide + 0.5) * cell + f * step[1] * opt.motion_step_px;
      draw_shape(frame, s.shape, s.color, cy, cx, radius);
      sample.media.push_back(std::move(frame));
    }
  }
  sample.caption = caption_for(sample.scene);
  return sample;
}

std::vector<int> instruction_prefix(SampleKind kind) {
  return {token::inst, token::describe,
          kind == SampleKind::image_caption ? token::image : token::video};
}

}  // namespace minivlm::synthetic
