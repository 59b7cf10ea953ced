// Straightforward loop-based SSIM / MS-SSIM reference, written directly from
// the published formulas. Shares no code with the library implementation.
#ifndef SCANFILL_TESTS_SSIM_ORACLE_HPP
#define SCANFILL_TESTS_SSIM_ORACLE_HPP

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracles {

// images as [C][H*W] planes in [0,1]
struct PlaneImage {
  std::int64_t h = 0, w = 0;
  std::vector<std::vector<double>> planes;
};

struct SsimOracleOut {
  double ssim = 0;
  double cs = 0;
};

inline SsimOracleOut ssim_reference(const PlaneImage& x, const PlaneImage& y,
                                    int win = 11, double sigma = 1.5,
                                    double k1 = 0.01, double k2 = 0.03,
                                    double range = 1.0) {
  std::vector<double> g(win * win);
  double gsum = 0;
  const double c = (win - 1) / 2.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      g[i * win + j] =
          std::exp(-((i - c) * (i - c) + (j - c) * (j - c)) / (2 * sigma * sigma));
      gsum += g[i * win + j];
    }
  for (double& v : g) v /= gsum;

  const double c1 = (k1 * range) * (k1 * range);
  const double c2 = (k2 * range) * (k2 * range);
  double ssim_acc = 0, cs_acc = 0;
  std::int64_t count = 0;
  for (std::size_t ch = 0; ch < x.planes.size(); ++ch) {
    const auto& xp = x.planes[ch];
    const auto& yp = y.planes[ch];
    for (std::int64_t top = 0; top + win <= x.h; ++top)
      for (std::int64_t left = 0; left + win <= x.w; ++left) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double wgt = g[i * win + j];
            const double xv = xp[(top + i) * x.w + left + j];
            const double yv = yp[(top + i) * x.w + left + j];
            mx += wgt * xv;
            my += wgt * yv;
            mxx += wgt * xv * xv;
            myy += wgt * yv * yv;
            mxy += wgt * xv * yv;
          }
        const double vx = mxx - mx * mx;
        const double vy = myy - my * my;
        const double cov = mxy - mx * my;
        const double cs = (2 * cov + c2) / (vx + vy + c2);
        const double lum = (2 * mx * my + c1) / (mx * mx + my * my + c1);
        ssim_acc += lum * cs;
        cs_acc += cs;
        ++count;
      }
  }
  return {ssim_acc / count, cs_acc / count};
}

inline PlaneImage downsample2(const PlaneImage& x) {
  PlaneImage out;
  out.h = x.h / 2;
  out.w = x.w / 2;
  for (const auto& p : x.planes) {
    std::vector<double> q(out.h * out.w);
    for (std::int64_t i = 0; i < out.h; ++i)
      for (std::int64_t j = 0; j < out.w; ++j)
        q[i * out.w + j] =
            (p[(2 * i) * x.w + 2 * j] + p[(2 * i) * x.w + 2 * j + 1] +
             p[(2 * i + 1) * x.w + 2 * j] + p[(2 * i + 1) * x.w + 2 * j + 1]) /
            4.0;
    out.planes.push_back(std::move(q));
  }
  return out;
}

inline double ms_ssim_reference(PlaneImage x, PlaneImage y,
                                std::vector<double> weights = {
                                    0.0448, 0.2856, 0.3001, 0.2363, 0.1333},
                                int win = 11) {
  std::size_t scales = 0;
  const std::int64_t min_dim = std::min(x.h, x.w);
  while (scales < weights.size() &&
         min_dim >= static_cast<std::int64_t>(win) * (std::int64_t{1} << scales))
    ++scales;
  double wsum = 0;
  for (std::size_t i = 0; i < scales; ++i) wsum += weights[i];
  double value = 1.0;
  for (std::size_t s = 0; s < scales; ++s) {
    const auto terms = ssim_reference(x, y, win);
    const double t = (s + 1 == scales) ? terms.ssim : terms.cs;
    const double w = weights[s] / wsum;
    const double sign = t < 0 ? -1.0 : 1.0;
    value *= sign * std::pow(std::abs(t), w);
    if (s + 1 < scales) {
      x = downsample2(x);
      y = downsample2(y);
    }
  }
  return value;
}

}  // namespace oracles

#endif  // SCANFILL_TESTS_SSIM_ORACLE_HPP
