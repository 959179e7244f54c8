#include "minivlm/image.hpp"

#include "minivlm/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace minivlm {

RasterImage::RasterImage(ImageDims dims) : dims_(dims) {
  if (!dims.valid()) throw ContractError("RasterImage: dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(dims.h_px) * static_cast<std::size_t>(dims.w_px) *
                     kChannels,
                 0.0);
}

RasterImage::RasterImage(ImageDims dims, std::vector<double> pixels)
    : dims_(dims), pixels_(std::move(pixels)) {
  if (!dims.valid()) throw ContractError("RasterImage: dimensions must be positive");
  if (pixels_.size() !=
      static_cast<std::size_t>(dims.h_px) * static_cast<std::size_t>(dims.w_px) * kChannels) {
    throw ContractError("RasterImage: pixel count does not match h * w * 3");
  }
}

void RasterImage::fill_rect(int y0, int x0, int h, int w, const double rgb[3]) {
  const int y1 = std::min(dims_.h_px, y0 + h);
  const int x1 = std::min(dims_.w_px, x0 + w);
  for (int y = std::max(0, y0); y < y1; ++y) {
    for (int x = std::max(0, x0); x < x1; ++x) {
      for (int c = 0; c < kChannels; ++c) at(y, x, c) = rgb[c];
    }
  }
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  void skip_whitespace_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  int read_uint(const char* what) {
    skip_whitespace_and_comments();
    long long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw FormatError(std::string("PPM: ") + what + " out of range");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw FormatError(std::string("PPM: expected ") + what);
    return static_cast<int>(value);
  }

  std::size_t& pos() { return pos_; }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

RasterImage decode_ppm(std::span<const unsigned char> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw FormatError("PPM: missing P6 magic");
  }
  HeaderReader reader(bytes.subspan(2));
  // The magic must be followed by whitespace.
  if (bytes.size() < 3 || !std::isspace(bytes[2])) throw FormatError("PPM: malformed header");
  const int width = reader.read_uint("width");
  const int height = reader.read_uint("height");
  const int maxval = reader.read_uint("maxval");
  if (width < 1 || height < 1) throw FormatError("PPM: dimensions must be positive");
  if (maxval != 255) throw FormatError("PPM: only maxval 255 is supported");
  std::size_t pos = 2 + reader.pos();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError("PPM: expected single whitespace after maxval");
  }
  ++pos;
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() - pos < expected) throw FormatError("PPM: truncated pixel data");
  if (bytes.size() - pos > expected) throw FormatError("PPM: trailing bytes after pixel data");

  std::vector<double> pixels(expected);
  for (std::size_t i = 0; i < expected; ++i) pixels[i] = bytes[pos + i] / 255.0;
  return RasterImage(ImageDims{height, width}, std::move(pixels));
}

RasterImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("PPM: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_ppm(bytes);
}

std::vector<unsigned char> encode_ppm(const RasterImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(header.size() + img.pixels().size());
  for (double v : img.pixels()) {
    out.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const RasterImage& img) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("PPM: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

struct Tap {
  int i0;
  int i1;
  double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[static_cast<std::size_t>(o)] = Tap{i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

RasterImage resize_bilinear(const RasterImage& img, ImageDims target) {
  if (!target.valid()) throw ContractError("resize_bilinear: target dims must be positive");
  if (target == img.dims()) return img;
  const auto ty = bilinear_taps(img.height(), target.h_px);
  const auto tx = bilinear_taps(img.width(), target.w_px);
  RasterImage out(target);
  for (int y = 0; y < target.h_px; ++y) {
    const Tap& a = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < target.w_px; ++x) {
      const Tap& b = tx[static_cast<std::size_t>(x)];
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        // a + (b - a) * t keeps constant regions exactly constant.
        const double p00 = img.at(a.i0, b.i0, c);
        const double p10 = img.at(a.i1, b.i0, c);
        const double top = p00 + (img.at(a.i0, b.i1, c) - p00) * b.frac;
        const double bot = p10 + (img.at(a.i1, b.i1, c) - p10) * b.frac;
        out.at(y, x, c) = top + (bot - top) * a.frac;
      }
    }
  }
  return out;
}

RasterImage crop(const RasterImage& img, int y0, int x0, int h, int w) {
  if (h < 1 || w < 1 || y0 < 0 || x0 < 0 || y0 + h > img.height() || x0 + w > img.width()) {
    throw ContractError("crop: box outside image");
  }
  RasterImage out(ImageDims{h, w});
  const auto row = static_cast<std::size_t>(w) * RasterImage::kChannels;
  for (int y = 0; y < h; ++y) {
    const double* src = img.data_at(y0 + y, x0);
    std::copy(src, src + row, out.data_at(y, 0));
  }
  return out;
}

}  // namespace minivlm
