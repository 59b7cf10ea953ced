#ifndef SCANFILL_INFERENCE_HPP
#define SCANFILL_INFERENCE_HPP

#include "scanfill/training.hpp"

namespace scanfill {

// Single-image application of an inpainting method: corrupt, predict,
// composite back to a raster. Image dims must match what the method expects;
// larger images go through patch_inpaint.
template <typename T>
RasterImage inpaint(const InpaintFn<T>& method, const RasterImage& image,
                    const ScanlineMask& mask, std::int64_t expected_size = 0) {
  if (image.h != mask.h || image.w != mask.w)
    shape_error("inpaint: image/mask size mismatch");
  if (expected_size > 0 &&
      (image.h != expected_size || image.w != expected_size))
    shape_error("inpaint: image is " + std::to_string(image.h) + "x" +
                std::to_string(image.w) + " but the model was trained on " +
                std::to_string(expected_size) + "x" +
                std::to_string(expected_size) +
                "; use patch-based inference for larger rasters");
  if (mask.missing_count() == 0) return image;
  auto mask_t = mask.template context_tensor<T>();
  auto corrupted = mul(image.template to_tensor<T>(), mask_t);
  auto out = method(corrupted, mask_t);
  auto result = RasterImage::from_tensor(out);
  // compositing guarantees this, but inference re-asserts it on the raster
  for (std::int64_t i = 0; i < mask.h * mask.w; ++i)
    if (!mask.bits[i])
      for (int c = 0; c < 3; ++c) result.data[i * 3 + c] = image.data[i * 3 + c];
  return result;
}

// Tile a large raster into patch x patch windows, inpaint each and stitch.
// The final row/column of tiles is edge-aligned, so tiles may re-cover
// pixels; with overlap 0 the later tile wins on re-covered hole pixels.
// With overlap > 0 overlapping predictions are blended by linear feathering.
template <typename T>
RasterImage patch_inpaint(const InpaintFn<T>& method, const RasterImage& image,
                          const ScanlineMask& mask, std::int64_t patch = 64,
                          std::int64_t overlap = 0) {
  if (image.h != mask.h || image.w != mask.w)
    shape_error("patch_inpaint: image/mask size mismatch");
  if (patch > image.h || patch > image.w)
    shape_error("patch_inpaint: patch " + std::to_string(patch) +
                " exceeds image " + std::to_string(image.h) + "x" +
                std::to_string(image.w));
  if (overlap < 0 || overlap >= patch)
    shape_error("patch_inpaint: overlap must be in [0, patch)");
  if (mask.missing_count() == 0) return image;

  const std::int64_t stride = patch - overlap;
  auto starts = [&](std::int64_t extent) {
    std::vector<std::int64_t> out;
    for (std::int64_t s = 0;; s += stride) {
      if (s + patch >= extent) {
        out.push_back(extent - patch);  // edge-aligned final tile
        break;
      }
      out.push_back(s);
    }
    return out;
  };
  const auto ys = starts(image.h);
  const auto xs = starts(image.w);

  if (overlap == 0) {
    RasterImage out = image;
    for (auto y0 : ys)
      for (auto x0 : xs) {
        RasterImage tile = RasterImage::filled(patch, patch);
        ScanlineMask tmask = ScanlineMask::empty(patch, patch);
        for (std::int64_t y = 0; y < patch; ++y)
          for (std::int64_t x = 0; x < patch; ++x) {
            for (int c = 0; c < 3; ++c)
              tile.at(y, x, c) = image.at(y0 + y, x0 + x, c);
            tmask.at(y, x) = mask.at(y0 + y, x0 + x);
          }
        auto filled = inpaint(method, tile, tmask);
        for (std::int64_t y = 0; y < patch; ++y)
          for (std::int64_t x = 0; x < patch; ++x)
            if (mask.at(y0 + y, x0 + x))
              for (int c = 0; c < 3; ++c)
                out.at(y0 + y, x0 + x, c) = filled.at(y, x, c);
      }
    return out;
  }

  // feathered blend: per-pixel weight ramps linearly from the tile border
  std::vector<float> acc(static_cast<std::size_t>(image.h * image.w * 3), 0.f);
  std::vector<float> wsum(static_cast<std::size_t>(image.h * image.w), 0.f);
  auto feather = [&](std::int64_t i) {
    const std::int64_t edge = std::min(i + 1, patch - i);
    return static_cast<float>(
        std::min<std::int64_t>(edge, overlap + 1)) /
           static_cast<float>(overlap + 1);
  };
  for (auto y0 : ys)
    for (auto x0 : xs) {
      RasterImage tile = RasterImage::filled(patch, patch);
      ScanlineMask tmask = ScanlineMask::empty(patch, patch);
      for (std::int64_t y = 0; y < patch; ++y)
        for (std::int64_t x = 0; x < patch; ++x) {
          for (int c = 0; c < 3; ++c)
            tile.at(y, x, c) = image.at(y0 + y, x0 + x, c);
          tmask.at(y, x) = mask.at(y0 + y, x0 + x);
        }
      auto filled = inpaint(method, tile, tmask);
      for (std::int64_t y = 0; y < patch; ++y)
        for (std::int64_t x = 0; x < patch; ++x) {
          const float w = feather(y) * feather(x);
          const std::int64_t gi = (y0 + y) * image.w + (x0 + x);
          wsum[gi] += w;
          for (int c = 0; c < 3; ++c)
            acc[gi * 3 + c] += w * filled.at(y, x, c);
        }
    }
  RasterImage out = image;
  for (std::int64_t i = 0; i < image.h * image.w; ++i)
    if (mask.bits[i] && wsum[i] > 0.f)
      for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = acc[i * 3 + c] / wsum[i];
  return out;
}

}  // namespace scanfill

#endif  // SCANFILL_INFERENCE_HPP
