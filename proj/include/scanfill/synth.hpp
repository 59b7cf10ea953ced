#ifndef SCANFILL_SYNTH_HPP
#define SCANFILL_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>

#include "scanfill/image.hpp"
#include "scanfill/rng.hpp"

namespace scanfill {

// Procedural texture families for smoke training and tests. "rings" is held
// out as the out-of-distribution family.
enum class TextureFamily { kGradient, kBlobs, kStripes, kRings };

inline RasterImage make_texture(TextureFamily family, std::uint64_t seed,
                                std::int64_t size) {
  Rng rng(seed ^ (static_cast<std::uint64_t>(family) << 32));
  RasterImage img = RasterImage::filled(size, size);
  const double inv = 1.0 / static_cast<double>(size);
  switch (family) {
    case TextureFamily::kGradient: {
      const double ax = rng.uniform(-1.0, 1.0), ay = rng.uniform(-1.0, 1.0);
      double base[3];
      for (auto& b : base) b = rng.uniform(0.2, 0.8);
      for (std::int64_t y = 0; y < size; ++y)
        for (std::int64_t x = 0; x < size; ++x) {
          const double g = 0.5 * (ax * (x * inv - 0.5) + ay * (y * inv - 0.5));
          for (int c = 0; c < 3; ++c)
            img.at(y, x, c) = static_cast<float>(
                std::clamp(base[c] + g * (c + 1) * 0.5, 0.0, 1.0));
        }
      break;
    }
    case TextureFamily::kBlobs: {
      // hard-edged blobs over a fine oriented grating: the grating carries
      // high-frequency structure a family prior can continue across gaps
      const int n = 4 + static_cast<int>(rng.below(4));
      std::vector<std::array<double, 6>> blobs;  // cy, cx, radius, rgb
      for (int i = 0; i < n; ++i)
        blobs.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                         rng.uniform(0.08, 0.22), rng.uniform(0.0, 1.0),
                         rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
      const double gfreq = rng.uniform(8.0, 14.0);
      const double gangle = rng.uniform(0.0, 3.14159);
      const double gca = std::cos(gangle), gsa = std::sin(gangle);
      for (std::int64_t y = 0; y < size; ++y)
        for (std::int64_t x = 0; x < size; ++x) {
          double acc[3] = {0.3, 0.3, 0.3};
          for (const auto& b : blobs) {
            const double dy = y * inv - b[0], dx = x * inv - b[1];
            const double d2 = (dy * dy + dx * dx) / (b[2] * b[2]);
            const double w = std::exp(-d2 * d2);
            for (int c = 0; c < 3; ++c) acc[c] += w * (b[3 + c] - 0.3);
          }
          const double gt = gca * x * inv + gsa * y * inv;
          const double grating =
              0.12 * std::sin(2.0 * 3.14159 * gfreq * gt);
          for (int c = 0; c < 3; ++c)
            img.at(y, x, c) =
                static_cast<float>(std::clamp(acc[c] + grating, 0.0, 1.0));
        }
      break;
    }
    case TextureFamily::kStripes: {
      // high-frequency near-square-wave gratings; wavelengths of a few
      // pixels make smooth interpolation across a gap visibly wrong
      const double freq = rng.uniform(6.0, 14.0);
      const double angle = rng.uniform(0.0, 3.14159);
      const double ca = std::cos(angle), sa = std::sin(angle);
      double lo[3], hi[3];
      for (int c = 0; c < 3; ++c) {
        lo[c] = rng.uniform(0.05, 0.4);
        hi[c] = rng.uniform(0.6, 0.95);
      }
      const double norm = std::tanh(3.0);
      for (std::int64_t y = 0; y < size; ++y)
        for (std::int64_t x = 0; x < size; ++x) {
          const double t = ca * x * inv + sa * y * inv;
          const double s =
              0.5 +
              0.5 * std::tanh(3.0 * std::sin(2.0 * 3.14159 * freq * t)) / norm;
          for (int c = 0; c < 3; ++c)
            img.at(y, x, c) = static_cast<float>(lo[c] + s * (hi[c] - lo[c]));
        }
      break;
    }
    case TextureFamily::kRings: {
      const double cy = rng.uniform(0.3, 0.7), cx = rng.uniform(0.3, 0.7);
      const double freq = rng.uniform(6.0, 12.0);
      for (std::int64_t y = 0; y < size; ++y)
        for (std::int64_t x = 0; x < size; ++x) {
          const double dy = y * inv - cy, dx = x * inv - cx;
          const double r = std::sqrt(dy * dy + dx * dx);
          const double s = 0.5 + 0.5 * std::cos(2.0 * 3.14159 * freq * r);
          img.at(y, x, 0) = static_cast<float>(0.2 + 0.6 * s);
          img.at(y, x, 1) = static_cast<float>(0.8 - 0.6 * s);
          img.at(y, x, 2) = static_cast<float>(0.3 + 0.4 * s * s);
        }
      break;
    }
  }
  return img;
}

// Scanline-style mask: a few slightly sloped horizontal bands of 3-6 rows,
// spaced out like gap-era stripes. Guarantees at least 100 missing pixels
// and under 20% total for sizes >= 32.
inline ScanlineMask make_scanline_mask(std::uint64_t seed, std::int64_t h,
                                       std::int64_t w) {
  Rng rng(seed);
  ScanlineMask m = ScanlineMask::empty(h, w);
  const std::int64_t budget =
      static_cast<std::int64_t>(0.18 * static_cast<double>(h * w));
  std::int64_t missing = 0;
  const int bands = 2 + static_cast<int>(rng.below(3));
  for (int b = 0; b < bands && missing < budget; ++b) {
    const std::int64_t y0 = static_cast<std::int64_t>(rng.below(
        static_cast<std::uint64_t>(h)));
    const std::int64_t thick = 3 + static_cast<std::int64_t>(rng.below(4));
    const double slope = rng.uniform(-0.08, 0.08);
    for (std::int64_t x = 0; x < w && missing < budget; ++x) {
      const std::int64_t yc =
          y0 + static_cast<std::int64_t>(std::lround(slope * x));
      for (std::int64_t t = 0; t < thick && missing < budget; ++t) {
        const std::int64_t y = yc + t;
        if (y >= 0 && y < h && !m.at(y, x)) {
          m.at(y, x) = 1;
          ++missing;
        }
      }
    }
  }
  // top up if the bands happened to overlap too much
  while (missing < std::min<std::int64_t>(100, budget)) {
    const std::int64_t y = static_cast<std::int64_t>(rng.below(
        static_cast<std::uint64_t>(h)));
    for (std::int64_t x = 0; x < w && missing < budget; ++x)
      if (!m.at(y, x)) {
        m.at(y, x) = 1;
        ++missing;
      }
  }
  return m;
}

struct SynthCorpus {
  std::vector<RasterImage> images;
  std::vector<std::string> ids;
  std::vector<ScanlineMask> mask_pool;
};

// deterministic smoke corpus: in-distribution families only, plus a mask pool
inline SynthCorpus make_corpus(std::size_t n_images, std::size_t n_masks,
                               std::int64_t size, std::uint64_t seed) {
  SynthCorpus c;
  const TextureFamily fams[] = {TextureFamily::kGradient, TextureFamily::kBlobs,
                                TextureFamily::kStripes};
  for (std::size_t i = 0; i < n_images; ++i) {
    c.images.push_back(make_texture(fams[i % 3], seed + i, size));
    c.ids.push_back("synth" + std::to_string(i));
  }
  for (std::size_t i = 0; i < n_masks; ++i)
    c.mask_pool.push_back(make_scanline_mask(seed * 1315423911ull + i, size, size));
  return c;
}

}  // namespace scanfill

#endif  // SCANFILL_SYNTH_HPP
