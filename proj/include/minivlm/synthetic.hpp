#pragma once

// Synthetic shape scenes with captions drawn from a small integer vocabulary.
//
// image_caption: a canvas holding 1-3 colored shapes on a 3x3 cell lattice;
//   caption = BOS (color shape cell)* EOS with shapes listed in cell order.
// video_caption: F in [2, 8] square frames with one shape moving a fixed step
//   per frame (wrapping at the border);
//   caption = BOS color shape start_cell direction frames_F EOS.

#include "minivlm/image.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace minivlm::synthetic {

enum class SampleKind { image_caption, video_caption };

inline constexpr int kColors = 6;
inline constexpr int kShapes = 3;
inline constexpr int kCells = 9;       // 3 x 3 lattice
inline constexpr int kLatticeSide = 3;
inline constexpr int kDirections = 4;  // up, down, left, right
inline constexpr int kMinFrames = 2;
inline constexpr int kMaxFrames = 8;
inline constexpr int kMaxShapes = 3;

namespace token {
inline constexpr int pad = 0;
inline constexpr int bos = 1;
inline constexpr int eos = 2;
inline constexpr int inst = 3;
inline constexpr int describe = 4;
inline constexpr int image = 5;
inline constexpr int video = 6;
inline constexpr int color_base = 8;
inline constexpr int shape_base = 16;
inline constexpr int cell_base = 24;
inline constexpr int direction_base = 40;
inline constexpr int frames_base = 48 - kMinFrames;  // frames_base + F for F in [2, 8]
inline constexpr int used = 56;                      // every caption token is < used
}  // namespace token

struct PlacedShape {
  int color = 0;
  int shape = 0;
  int cell = 0;
  friend bool operator==(const PlacedShape&, const PlacedShape&) = default;
};

struct Motion {
  int direction = 0;
  int frames = kMinFrames;
  friend bool operator==(const Motion&, const Motion&) = default;
};

/// What a caption describes. Images carry 1-3 shapes sorted by cell; videos
/// carry exactly one shape (its starting cell) plus motion.
struct Scene {
  SampleKind kind = SampleKind::image_caption;
  std::vector<PlacedShape> shapes;
  Motion motion;
  friend bool operator==(const Scene&, const Scene&) = default;
};

struct SyntheticSample {
  SampleKind kind = SampleKind::image_caption;
  Scene scene;
  std::vector<RasterImage> media;  // one image, or the video frames
  std::vector<int> caption;
};

struct GeneratorOptions {
  /// Candidate image canvases; one is picked uniformly per sample.
  std::vector<ImageDims> image_canvases = {{336, 336}, {336, 672}, {672, 336}};
  int frame_px = 336;
  int motion_step_px = 28;
};

std::vector<int> caption_for(const Scene& scene);
/// Inverse of caption_for; nullopt for token strings it cannot produce.
std::optional<Scene> decode_caption(const std::vector<int>& caption);
std::string describe(const Scene& scene);

SyntheticSample generate_sample(std::uint64_t seed, SampleKind kind,
                                const GeneratorOptions& opt = {});

/// Prompt tokens placed before the media in instruction-style samples.
std::vector<int> instruction_prefix(SampleKind kind);

}  // namespace minivlm::synthetic
