#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace uiscout {

// Row-major 8-bit raster with `Channels` interleaved samples per pixel.
template <int Channels>
class Raster {
 public:
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height * Channels, fill) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("raster dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  std::uint8_t* pixel(int x, int y) { return data_.data() + offset(x, y); }
  const std::uint8_t* pixel(int x, int y) const { return data_.data() + offset(x, y); }
  std::uint8_t at(int x, int y, int c = 0) const { return data_[offset(x, y) + c]; }

  std::span<const std::uint8_t> bytes() const { return data_; }
  std::span<std::uint8_t> bytes() { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

using GrayImage = Raster<1>;
using RgbImage = Raster<3>;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// luma = 0.299 R + 0.587 G + 0.114 B, rounded half-up; exact in integers.
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

GrayImage to_gray(const RgbImage& rgb);
RgbImage to_rgb(const GrayImage& gray);

// Copy of the w x h block at (x, y); the block must lie inside the image.
GrayImage crop(const GrayImage& img, int x, int y, int w, int h);

// Copies `src` into `dst` at (x, y), clipped to the destination.
void blit(GrayImage& dst, const GrayImage& src, int x, int y);
void blit(RgbImage& dst, const GrayImage& src, int x, int y);

// Nearest-neighbour rescale to the given size.
GrayImage resize_nearest(const GrayImage& src, int width, int height);

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// PNG decoding accepts 8-bit gray, gray+alpha, RGB and RGBA (alpha dropped,
// palette expanded). Encoding is deterministic: fixed zlib level, no
// timestamps or text chunks.
GrayImage read_png_gray(const std::filesystem::path& path);
RgbImage read_png_rgb(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);
std::vector<std::uint8_t> encode_png(const RgbImage& img);

// SHA-256 over dimensions and pixel bytes.
std::string content_hash(const RgbImage& img);
std::string content_hash(const GrayImage& img);

}  // namespace uiscout
