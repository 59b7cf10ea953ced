#ifndef SCANFILL_IMAGE_HPP
#define SCANFILL_IMAGE_HPP

#include <cstdint>

#include "scanfill/tensor.hpp"

namespace scanfill {

// H x W x 3 image, values in [0,1], HWC layout
struct RasterImage {
  std::int64_t h = 0, w = 0;
  std::vector<float> data;  // size h*w*3

  static RasterImage filled(std::int64_t h, std::int64_t w, float v = 0.f) {
    RasterImage img;
    img.h = h;
    img.w = w;
    img.data.assign(static_cast<std::size_t>(h * w * 3), v);
    return img;
  }

  float& at(std::int64_t y, std::int64_t x, int c) {
    return data[(y * w + x) * 3 + c];
  }
  float at(std::int64_t y, std::int64_t x, int c) const {
    return data[(y * w + x) * 3 + c];
  }

  // [1,3,H,W] tensor
  template <typename T>
  Tensor<T> to_tensor() const {
    auto t = Tensor<T>::zeros({1, 3, h, w});
    for (int c = 0; c < 3; ++c)
      for (std::int64_t i = 0; i < h * w; ++i)
        t.data()[c * h * w + i] = static_cast<T>(data[i * 3 + c]);
    return t;
  }

  template <typename T>
  static RasterImage from_tensor(const Tensor<T>& t) {
    if (t.rank() != 4 || t.dim(0) != 1 || t.dim(1) != 3)
      shape_error("RasterImage expects a [1,3,H,W] tensor, got " +
                  shape_str(t.shape()));
    RasterImage img = filled(t.dim(2), t.dim(3));
    const std::int64_t hw = img.h * img.w;
    for (int c = 0; c < 3; ++c)
      for (std::int64_t i = 0; i < hw; ++i)
        img.data[i * 3 + c] = static_cast<float>(t.data()[c * hw + i]);
    return img;
  }
};

// binary H x W mask, 1 = missing pixel
struct ScanlineMask {
  std::int64_t h = 0, w = 0;
  std::vector<std::uint8_t> bits;

  static ScanlineMask empty(std::int64_t h, std::int64_t w) {
    ScanlineMask m;
    m.h = h;
    m.w = w;
    m.bits.assign(static_cast<std::size_t>(h * w), 0);
    return m;
  }

  std::uint8_t& at(std::int64_t y, std::int64_t x) { return bits[y * w + x]; }
  std::uint8_t at(std::int64_t y, std::int64_t x) const { return bits[y * w + x]; }

  std::int64_t missing_count() const {
    std::int64_t n = 0;
    for (auto b : bits) n += b ? 1 : 0;
    return n;
  }
  double missing_fraction() const {
    return bits.empty() ? 0.0
                        : static_cast<double>(missing_count()) /
                              static_cast<double>(bits.size());
  }
  // thickness bookkeeping for future stratification: max run of missing rows
  std::int64_t max_row_thickness() const {
    std::int64_t best = 0;
    for (std::int64_t x = 0; x < w; ++x) {
      std::int64_t run = 0;
      for (std::int64_t y = 0; y < h; ++y) {
        run = at(y, x) ? run + 1 : 0;
        best = std::max(best, run);
      }
    }
    return best;
  }

  // [1,1,H,W] context-mask tensor: 1 = observed (mask bit 0)
  template <typename T>
  Tensor<T> context_tensor() const {
    auto t = Tensor<T>::zeros({1, 1, h, w});
    for (std::int64_t i = 0; i < h * w; ++i)
      t.data()[i] = bits[i] ? T(0) : T(1);
    return t;
  }
};

// One inpainting task: clean ground truth + scanline mask. Context pixels are
// the unmasked positions; the corrupted view zero-fills missing pixels.
struct InpaintTask {
  RasterImage clean;
  ScanlineMask mask;

  InpaintTask() = default;
  InpaintTask(RasterImage image, ScanlineMask m)
      : clean(std::move(image)), mask(std::move(m)) {
    if (clean.h != mask.h || clean.w != mask.w)
      shape_error("InpaintTask: image " + std::to_string(clean.h) + "x" +
                  std::to_string(clean.w) + " vs mask " +
                  std::to_string(mask.h) + "x" + std::to_string(mask.w));
  }

  RasterImage corrupted() const {
    RasterImage out = clean;
    for (std::int64_t i = 0; i < mask.h * mask.w; ++i)
      if (mask.bits[i])
        for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = 0.f;
    return out;
  }
};

// composited = M_C * input + (1 - M_C) * prediction; context pixels come out
// bit-exact because their prediction contribution is multiplied by zero
template <typename T>
Tensor<T> composite(const Tensor<T>& prediction, const Tensor<T>& clean,
                    const Tensor<T>& context_mask) {
  auto one_minus = Tensor<T>::scalar(T(1)) - context_mask;
  return mul(context_mask, clean) + mul(one_minus, prediction);
}

inline RasterImage composite(const RasterImage& prediction,
                             const RasterImage& input,
                             const ScanlineMask& mask) {
  RasterImage out = prediction;
  for (std::int64_t i = 0; i < mask.h * mask.w; ++i)
    if (!mask.bits[i])
      for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = input.data[i * 3 + c];
  return out;
}

}  // namespace scanfill

#endif  // SCANFILL_IMAGE_HPP
