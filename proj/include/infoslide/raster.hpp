#pragma once

// 8-bit RGBA rasters with PNG encode/decode and JPEG decode.

#include <array>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "infoslide/util.hpp"

namespace infoslide {

using Rgba = std::array<std::uint8_t, 4>;

class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, Rgba fill = {0, 0, 0, 255}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("Raster: dimensions must be positive");
    pixels_.resize(static_cast<std::size_t>(width) * height * 4);
    for (std::size_t i = 0; i < pixels_.size(); i += 4) std::memcpy(&pixels_[i], fill.data(), 4);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  Rgba at(int x, int y) const {
    const auto* p = &pixels_[offset(x, y)];
    return {p[0], p[1], p[2], p[3]};
  }

  void set(int x, int y, Rgba c) { std::memcpy(&pixels_[offset(x, y)], c.data(), 4); }

  std::span<const std::uint8_t> data() const { return pixels_; }
  std::span<std::uint8_t> data() { return pixels_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t offset(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) throw std::out_of_range("Raster: pixel out of range");
    return (static_cast<std::size_t>(y) * width_ + x) * 4;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

class ImageCodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Bytes encode_png(const Raster& raster) {
  if (raster.empty()) throw ImageCodecError("encode_png: empty raster");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width());
  image.height = static_cast<png_uint_32>(raster.height());
  image.format = PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, raster.data().data(), 0, nullptr))
    throw ImageCodecError(std::string("encode_png: ") + image.message);
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, raster.data().data(), 0, nullptr))
    throw ImageCodecError(std::string("encode_png: ") + image.message);
  out.resize(size);
  return out;
}

namespace detail {

inline Raster decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw ImageCodecError(std::string("decode_png: ") + image.message);
  image.format = PNG_FORMAT_RGBA;
  Raster out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.data().data(), 0, nullptr)) {
    png_image_free(&image);
    throw ImageCodecError(std::string("decode_png: ") + image.message);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

inline bool decode_jpeg_into(std::span<const std::uint8_t> bytes, std::vector<std::uint8_t>& rgb, int& width,
                             int& height, std::string& error) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    error = err.message;
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = &rgb[static_cast<std::size_t>(cinfo.output_scanline) * width * 3];
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

inline Raster decode_jpeg(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> rgb;
  int width = 0;
  int height = 0;
  std::string error;
  if (!decode_jpeg_into(bytes, rgb, width, height, error)) throw ImageCodecError("decode_jpeg: " + error);
  Raster out(width, height);
  auto dst = out.data();
  for (std::size_t i = 0, j = 0; i < rgb.size(); i += 3, j += 4) {
    dst[j] = rgb[i];
    dst[j + 1] = rgb[i + 1];
    dst[j + 2] = rgb[i + 2];
    dst[j + 3] = 255;
  }
  return out;
}

}  // namespace detail

/// Decodes PNG or JPEG, detected by signature.
inline Raster decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kPng, 4) == 0) return detail::decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8) return detail::decode_jpeg(bytes);
  throw ImageCodecError("unsupported image format (expected PNG or JPEG)");
}

}  // namespace infoslide
