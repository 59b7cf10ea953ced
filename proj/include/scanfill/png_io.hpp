#ifndef SCANFILL_PNG_IO_HPP
#define SCANFILL_PNG_IO_HPP

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>

#include "scanfill/image.hpp"

namespace scanfill {

// Decoded 8-bit PNG: 1 (gray), 3 (RGB) or 4 (RGBA) channels, row-major HWC.
struct PngImage {
  std::int64_t h = 0, w = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::int64_t y, std::int64_t x, int c) const {
    return pixels[(y * w + x) * channels + c];
  }
};

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
}  // namespace detail

inline PngImage read_png(const std::string& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(
      std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open " + path);
  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw std::runtime_error(path + ": not a PNG file");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path + ": PNG decode error");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path + ": unsupported bit depth (16)");
  }
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  PngImage img;
  img.w = png_get_image_width(png, info);
  img.h = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  if (img.channels == 2) {  // gray+alpha -> expand to RGBA
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    img.channels = png_get_channels(png, info);
  }
  img.pixels.resize(static_cast<std::size_t>(img.h * img.w * img.channels));
  std::vector<png_bytep> rows(img.h);
  for (std::int64_t y = 0; y < img.h; ++y)
    rows[y] = img.pixels.data() + y * img.w * img.channels;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png(const std::string& path, const PngImage& img) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(
      std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) throw std::runtime_error("libpng init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error(path + ": PNG encode error");
  }
  png_init_io(png, fp.get());
  int color_type = PNG_COLOR_TYPE_RGB;
  if (img.channels == 1) color_type = PNG_COLOR_TYPE_GRAY;
  if (img.channels == 4) color_type = PNG_COLOR_TYPE_RGBA;
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.w),
               static_cast<png_uint_32>(img.h), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.h);
  for (std::int64_t y = 0; y < img.h; ++y)
    rows[y] = const_cast<png_bytep>(img.pixels.data() +
                                    y * img.w * img.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline void write_png_rgb(const std::string& path, const RasterImage& img) {
  PngImage out;
  out.h = img.h;
  out.w = img.w;
  out.channels = 3;
  out.pixels.resize(static_cast<std::size_t>(img.h * img.w * 3));
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const float v = std::min(1.f, std::max(0.f, img.data[i]));
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.f));
  }
  write_png(path, out);
}

// mask PNG convention: 8-bit grayscale, 255 = missing
inline void write_png_mask(const std::string& path, const ScanlineMask& m) {
  PngImage out;
  out.h = m.h;
  out.w = m.w;
  out.channels = 1;
  out.pixels.resize(static_cast<std::size_t>(m.h * m.w));
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    out.pixels[i] = m.bits[i] ? 255 : 0;
  write_png(path, out);
}

inline ScanlineMask read_png_mask(const std::string& path) {
  const PngImage img = read_png(path);
  ScanlineMask m = ScanlineMask::empty(img.h, img.w);
  for (std::int64_t i = 0; i < img.h * img.w; ++i)
    m.bits[i] = img.pixels[i * img.channels] >= 128 ? 1 : 0;
  return m;
}

}  // namespace scanfill

#endif  // SCANFILL_PNG_IO_HPP
