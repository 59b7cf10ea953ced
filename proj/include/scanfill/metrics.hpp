#ifndef SCANFILL_METRICS_HPP
#define SCANFILL_METRICS_HPP

#include <numeric>

#include "scanfill/nn.hpp"
#include "scanfill/tensor.hpp"

namespace scanfill {

struct SsimParams {
  int window_size = 11;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  void validate() const {
    if (window_size < 3 || window_size % 2 == 0)
      shape_error("SSIM window_size must be odd and >= 3");
    if (k1 <= 0 || k2 <= 0) shape_error("SSIM k1,k2 must be positive");
  }
};

struct MsSsimParams {
  SsimParams base;
  // canonical five-scale weights; renormalized when fewer scales fit
  std::vector<double> scale_weights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

  void validate() const {
    base.validate();
    if (scale_weights.empty()) shape_error("MS-SSIM needs at least one weight");
    for (double w : scale_weights)
      if (w <= 0) shape_error("MS-SSIM weights must be positive");
  }

  std::vector<double> normalized_weights(std::size_t scales) const {
    std::vector<double> w(scale_weights.begin(),
                          scale_weights.begin() + scales);
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= s;
    return w;
  }
};

namespace detail {

template <typename T>
Tensor<T> gaussian_window(const SsimParams& p) {
  const int n = p.window_size;
  const double c = (n - 1) / 2.0;
  std::vector<T> w(static_cast<std::size_t>(n) * n);
  double total = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
      const double v = std::exp(-d2 / (2.0 * p.window_sigma * p.window_sigma));
      w[i * n + j] = static_cast<T>(v);
      total += v;
    }
  for (auto& v : w) v = static_cast<T>(v / total);
  return Tensor<T>::from_data({n, n}, std::move(w));
}

// mean luminance-contrast-structure terms over all valid windows and channels
template <typename T>
struct SsimTerms {
  Tensor<T> ssim;  // full SSIM (luminance included)
  Tensor<T> cs;    // contrast-structure only
};

template <typename T>
SsimTerms<T> ssim_terms(const Tensor<T>& a, const Tensor<T>& b,
                        const SsimParams& p) {
  p.validate();
  if (a.shape() != b.shape())
    shape_error("ssim: shape mismatch " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
  if (a.rank() != 4) shape_error("ssim expects [B,C,H,W]");
  if (a.dim(2) < p.window_size || a.dim(3) < p.window_size)
    shape_error("ssim: image " + shape_str(a.shape()) +
                " smaller than window " + std::to_string(p.window_size));
  auto g = gaussian_window<T>(p);
  const T c1 = static_cast<T>(p.k1 * p.dynamic_range * p.k1 * p.dynamic_range);
  const T c2 = static_cast<T>(p.k2 * p.dynamic_range * p.k2 * p.dynamic_range);
  auto mu1 = depthwise_conv2d(a, g);
  auto mu2 = depthwise_conv2d(b, g);
  auto mu1_sq = mul(mu1, mu1);
  auto mu2_sq = mul(mu2, mu2);
  auto mu12 = mul(mu1, mu2);
  auto sigma1 = sub(depthwise_conv2d(mul(a, a), g), mu1_sq);
  auto sigma2 = sub(depthwise_conv2d(mul(b, b), g), mu2_sq);
  auto sigma12 = sub(depthwise_conv2d(mul(a, b), g), mu12);
  auto cs_map = div(sigma12 * T(2) + c2, sigma1 + sigma2 + c2);
  auto lum_map = div(mu12 * T(2) + c1, mu1_sq + mu2_sq + c1);
  return {mean(mul(lum_map, cs_map)), mean(cs_map)};
}

}  // namespace detail

// Single-scale SSIM over all valid windows and channels; symmetric in (a,b),
// equals 1 iff a == b. Differentiable w.r.t. both images.
template <typename T>
Tensor<T> ssim(const Tensor<T>& a, const Tensor<T>& b,
               const SsimParams& p = {}) {
  return detail::ssim_terms(a, b, p).ssim;
}

template <typename T>
struct MsSsimResult {
  Tensor<T> value;        // unclamped, differentiable
  std::size_t scales = 0;
  bool scale_reduced = false;  // warning record: image too small for all scales
};

// Multi-scale SSIM: contrast-structure terms at every scale, luminance at the
// final scale, combined with sign-preserving weighted powers. Too-small images
// automatically use fewer scales with renormalized weights.
template <typename T>
MsSsimResult<T> ms_ssim_node(const Tensor<T>& a, const Tensor<T>& b,
                             const MsSsimParams& p = {}) {
  p.validate();
  if (a.shape() != b.shape())
    shape_error("ms_ssim: shape mismatch " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
  const std::int64_t min_dim = std::min(a.dim(2), a.dim(3));
  std::size_t scales = 0;
  while (scales < p.scale_weights.size() &&
         min_dim >= static_cast<std::int64_t>(p.base.window_size) *
                        (std::int64_t{1} << scales))
    ++scales;
  if (scales == 0)
    shape_error("ms_ssim: image " + shape_str(a.shape()) +
                " smaller than one window at the base scale");
  const auto weights = p.normalized_weights(scales);
  Tensor<T> cur_a = a, cur_b = b;
  Tensor<T> value = Tensor<T>::scalar(T(1));
  for (std::size_t s = 0; s < scales; ++s) {
    auto terms = detail::ssim_terms(cur_a, cur_b, p.base);
    const auto& term = (s + 1 == scales) ? terms.ssim : terms.cs;
    value = mul(value, signed_pow(term, static_cast<T>(weights[s])));
    if (s + 1 < scales) {
      cur_a = avg_pool2d(cur_a, 2);
      cur_b = avg_pool2d(cur_b, 2);
    }
  }
  return {value, scales, scales < p.scale_weights.size()};
}

// Reported MS-SSIM: clamped to [0,1]. The raw value can be marginally
// negative on adversarial pairs; the loss path uses the unclamped node.
template <typename T>
double ms_ssim(const Tensor<T>& a, const Tensor<T>& b,
               const MsSsimParams& p = {}) {
  const double raw = static_cast<double>(ms_ssim_node(a, b, p).value.item());
  return std::min(1.0, std::max(0.0, raw));
}

// loss = 1 - ms_ssim(pred, target), computed on full (composited) images
template <typename T>
Tensor<T> ms_ssim_loss(const Tensor<T>& pred, const Tensor<T>& target,
                       const MsSsimParams& p = {}) {
  return sub(Tensor<T>::scalar(T(1)), ms_ssim_node(pred, target, p).value);
}

struct MapeResult {
  double value = 0.0;        // percent
  std::size_t excluded = 0;  // terms dropped by the |target| guard
};

inline constexpr double kMapeEpsilon = 1e-6;

inline MapeResult mape(const std::vector<double>& pred,
                       const std::vector<double>& target) {
  if (pred.size() != target.size())
    shape_error("mape: size mismatch");
  MapeResult r;
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::abs(target[i]) < kMapeEpsilon) {
      ++r.excluded;
      continue;
    }
    acc += std::abs(pred[i] - target[i]) / std::abs(target[i]);
    ++n;
  }
  r.value = n ? 100.0 * acc / static_cast<double>(n) : 0.0;
  return r;
}

inline double mse(const std::vector<double>& pred,
                  const std::vector<double>& target) {
  if (pred.size() != target.size())
    shape_error("mse: size mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return pred.empty() ? 0.0 : acc / static_cast<double>(pred.size());
}

}  // namespace scanfill

#endif  // SCANFILL_METRICS_HPP
