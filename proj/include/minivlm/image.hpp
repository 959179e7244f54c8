#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace minivlm {

struct ImageDims {
  int h_px = 0;
  int w_px = 0;

  bool valid() const noexcept { return h_px >= 1 && w_px >= 1; }
  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// Dense RGB image, row-major with interleaved channels, values in [0, 1].
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  /// Allocates a black image. Throws ContractError for non-positive dims.
  explicit RasterImage(ImageDims dims);
  /// Takes ownership of `pixels`; its size must be h * w * 3.
  RasterImage(ImageDims dims, std::vector<double> pixels);

  const ImageDims& dims() const noexcept { return dims_; }
  int height() const noexcept { return dims_.h_px; }
  int width() const noexcept { return dims_.w_px; }

  double& at(int y, int x, int c) { return pixels_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }

  /// Pointer to the first sample of pixel (y, x).
  const double* data_at(int y, int x) const { return &pixels_[index(y, x, 0)]; }
  double* data_at(int y, int x) { return &pixels_[index(y, x, 0)]; }

  std::span<const double> pixels() const noexcept { return pixels_; }
  std::span<double> pixels() noexcept { return pixels_; }

  /// Sets every pixel in [y0, y0+h) x [x0, x0+w) (clipped) to `rgb`.
  void fill_rect(int y0, int x0, int h, int w, const double rgb[3]);

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.w_px) +
            static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
  }

  ImageDims dims_{};
  std::vector<double> pixels_;
};

/// Parses a binary PPM (P6) with maxval 255. Header comments are accepted;
/// anything else (other magic, maxval, truncated or trailing data) throws
/// FormatError. Samples are divided by 255.
RasterImage decode_ppm(std::span<const unsigned char> bytes);
RasterImage read_ppm(const std::filesystem::path& path);

/// Encodes as P6/255, rounding each sample of clamp(v, 0, 1) * 255 to nearest.
std::vector<unsigned char> encode_ppm(const RasterImage& img);
void write_ppm(const std::filesystem::path& path, const RasterImage& img);

/// Bilinear resampling with half-pixel centers:
///   src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1].
/// Resizing to the same size returns an exact copy.
RasterImage resize_bilinear(const RasterImage& img, ImageDims target);

/// Copies the box [y0, y0+h) x [x0, x0+w). The box must lie inside the image.
RasterImage crop(const RasterImage& img, int y0, int x0, int h, int w);

}  // namespace minivlm
