#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lcasc/error.hpp"
#include "lcasc/tensor.hpp"

namespace lcasc {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* out = static_cast<std::string*>(png_get_error_ptr(png));
  if (out) *out = msg;
  png_longjmp(png, 1);
}
inline void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace detail

// Decodes a PNG into values in [0, 1]. Grayscale is replicated to RGB and
// palettes are expanded; images carrying an alpha channel are rejected.
inline ImageTensor read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());

  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path.string() + ": not a PNG file");
  }

  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, detail::png_error_fn,
                                           detail::png_warning_fn);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("png_create_info_struct failed");
  }

  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  // Assigned between setjmp and the last libpng call.
  volatile png_uint_32 width = 0, height = 0;
  volatile int channels = 0, bit_depth = 0;
  volatile bool has_alpha = false;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": PNG decode failed: " + message);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  has_alpha = (color_type & PNG_COLOR_MASK_ALPHA) != 0;
  if (!has_alpha) {
    if (png_get_bit_depth(png, info) == 16) png_set_swap(png);
    png_read_update_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    channels = png_get_channels(png, info);
    bit_depth = png_get_bit_depth(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    pixels.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);

  if (has_alpha) {
    throw FormatError(path.string() + ": unsupported channel layout (alpha channel present)");
  }
  if (channels != 1 && channels != 3) {
    throw FormatError(path.string() + ": unsupported channel count " + std::to_string(channels));
  }

  const std::size_t H = height, W = width;
  const std::size_t C = static_cast<std::size_t>(channels);
  const bool wide = bit_depth == 16;
  ImageTensor out(H, W, 3);
  const double denom = wide ? 65535.0 : 255.0;
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src_c = C == 1 ? 0 : c;
        const std::size_t idx = (y * W + x) * C + src_c;
        double v;
        if (wide) {
          std::uint16_t s;
          std::memcpy(&s, pixels.data() + 2 * idx, 2);
          v = s;
        } else {
          v = pixels[idx];
        }
        out(y, x, c) = v / denom;
      }
    }
  }
  return out;
}

inline std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// Writes an 8-bit gray (1 channel) or RGB (3 channel) PNG. Values are clamped
// to [0, 1]. Output bytes depend only on the pixel values.
inline void write_png(const std::filesystem::path& path, const ImageTensor& image) {
  const std::size_t C = image.depth();
  if (C != 1 && C != 3) {
    throw DimensionError("channels: PNG output needs 1 or 3 channels, got " + std::to_string(C));
  }
  if (image.rows() == 0 || image.cols() == 0) throw DimensionError("PNG output is empty");

  std::vector<std::uint8_t> bytes(image.size());
  const auto v = image.values();
  for (std::size_t i = 0; i < v.size(); ++i) bytes[i] = to_byte(v[i]);

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    detail::FilePtr fp(std::fopen(tmp.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + tmp.string());

    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message,
                                              detail::png_error_fn, detail::png_warning_fn);
    if (!png) throw Error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
      png_destroy_write_struct(&png, nullptr);
      throw Error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw IoError(path.string() + ": PNG encode failed: " + message);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.cols()),
                 static_cast<png_uint_32>(image.rows()), 8,
                 C == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    const std::size_t stride = image.cols() * C;
    for (std::size_t y = 0; y < image.rows(); ++y) {
      png_write_row(png, bytes.data() + y * stride);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(fp.get()) != 0) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace lcasc
