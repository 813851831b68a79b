#include "uiscout/image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include <png.h>

#include "uiscout/util.hpp"

namespace uiscout {

GrayImage to_gray(const RgbImage& rgb) {
  GrayImage out(rgb.width(), rgb.height());
  const auto src = rgb.bytes();
  auto dst = out.bytes();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = luma(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

RgbImage to_rgb(const GrayImage& gray) {
  RgbImage out(gray.width(), gray.height());
  const auto src = gray.bytes();
  auto dst = out.bytes();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  }
  return out;
}

GrayImage crop(const GrayImage& img, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || x + w > img.width() || y + h > img.height()) {
    throw std::out_of_range("crop outside image");
  }
  GrayImage out(w, h);
  for (int r = 0; r < h; ++r) {
    std::memcpy(out.pixel(0, r), img.pixel(x, y + r), static_cast<std::size_t>(w));
  }
  return out;
}

namespace {

template <int C>
void blit_gray(Raster<C>& dst, const GrayImage& src, int x, int y) {
  const int x0 = std::max(0, x);
  const int y0 = std::max(0, y);
  const int x1 = std::min(dst.width(), x + src.width());
  const int y1 = std::min(dst.height(), y + src.height());
  for (int py = y0; py < y1; ++py) {
    for (int px = x0; px < x1; ++px) {
      const std::uint8_t v = src.at(px - x, py - y);
      std::uint8_t* d = dst.pixel(px, py);
      for (int c = 0; c < C; ++c) d[c] = v;
    }
  }
}

}  // namespace

void blit(GrayImage& dst, const GrayImage& src, int x, int y) { blit_gray(dst, src, x, y); }
void blit(RgbImage& dst, const GrayImage& src, int x, int y) { blit_gray(dst, src, x, y); }

GrayImage resize_nearest(const GrayImage& src, int width, int height) {
  GrayImage out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(src.height() - 1, static_cast<int>((static_cast<long>(y) * src.height()) / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(src.width() - 1, static_cast<int>((static_cast<long>(x) * src.width()) / width));
      *out.pixel(x, y) = src.at(sx, sy);
    }
  }
  return out;
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image: " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

struct Decoded {
  int width = 0;
  int height = 0;
  bool color = false;
  std::vector<std::uint8_t> pixels;  // GA or RGBA
};

Decoded decode(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageError("invalid PNG " + path.string() + ": " + image.message);
  }
  Decoded d;
  d.width = static_cast<int>(image.width);
  d.height = static_cast<int>(image.height);
  d.color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = d.color ? PNG_FORMAT_RGBA : PNG_FORMAT_GA;
  d.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, d.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ImageError("failed to decode PNG " + path.string() + ": " + image.message);
  }
  if (d.width <= 0 || d.height <= 0) throw ImageError("empty PNG " + path.string());
  return d;
}

template <int C>
std::vector<std::uint8_t> encode(const Raster<C>& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = C == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, img.bytes().data(), 0, nullptr)) {
    throw ImageError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.bytes().data(), 0, nullptr)) {
    throw ImageError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError("cannot write image: " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw ImageError("short write: " + path.string());
}

template <int C>
std::string hash_raster(const Raster<C>& img) {
  std::vector<std::uint8_t> buf;
  const auto px = img.bytes();
  buf.reserve(px.size() + 12);
  for (std::uint32_t v : {static_cast<std::uint32_t>(img.width()),
                          static_cast<std::uint32_t>(img.height()),
                          static_cast<std::uint32_t>(C)}) {
    for (int s = 0; s < 32; s += 8) buf.push_back(static_cast<std::uint8_t>(v >> s));
  }
  buf.insert(buf.end(), px.begin(), px.end());
  return sha256_hex(buf);
}

}  // namespace

GrayImage read_png_gray(const std::filesystem::path& path) {
  const Decoded d = decode(path);
  GrayImage out(d.width, d.height);
  auto dst = out.bytes();
  if (d.color) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] = luma(d.pixels[4 * i], d.pixels[4 * i + 1], d.pixels[4 * i + 2]);
    }
  } else {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = d.pixels[2 * i];
  }
  return out;
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
  const Decoded d = decode(path);
  RgbImage out(d.width, d.height);
  auto dst = out.bytes();
  const std::size_t n = dst.size() / 3;
  for (std::size_t i = 0; i < n; ++i) {
    if (d.color) {
      dst[3 * i] = d.pixels[4 * i];
      dst[3 * i + 1] = d.pixels[4 * i + 1];
      dst[3 * i + 2] = d.pixels[4 * i + 2];
    } else {
      dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = d.pixels[2 * i];
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const RgbImage& img) { return encode(img); }

void write_png(const std::filesystem::path& path, const RgbImage& img) {
  write_bytes(path, encode(img));
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  write_bytes(path, encode(img));
}

std::string content_hash(const RgbImage& img) { return hash_raster(img); }
std::string content_hash(const GrayImage& img) { return hash_raster(img); }

}  // namespace uiscout
