#ifndef SCANFILL_BASELINES_HPP
#define SCANFILL_BASELINES_HPP

#include <deque>

#include "scanfill/image.hpp"
#include "scanfill/np_models.hpp"

namespace scanfill {

// ---------------------------------------------------------------- Navier-Stokes

struct NsConfig {
  int max_iters = 3000;
  double dt = 0.1;
  double aniso_weight = 0.5;  // diffusion strength relative to transport
  double tol = 1e-5;          // mean absolute update over hole pixels

  void validate() const {
    if (dt <= 0 || tol <= 0) shape_error("NsConfig: dt and tol must be > 0");
  }
};

struct NsReport {
  int iterations = 0;
  bool converged = false;
  bool isolated_region_filled = false;  // hole with no observed neighbor
  std::vector<double> residuals;        // mean abs update per iteration
};

namespace detail {

// clamped (replicate) index
inline std::int64_t clampi(std::int64_t v, std::int64_t n) {
  return v < 0 ? 0 : (v >= n ? n - 1 : v);
}

// flood fill of one missing-pixel region; returns true if any pixel in the
// region touches an observed 4-neighbor
inline bool region_touches_context(const ScanlineMask& mask, std::int64_t sy,
                                   std::int64_t sx,
                                   std::vector<std::uint8_t>& seen,
                                   std::vector<std::int64_t>& region) {
  bool touches = false;
  std::deque<std::int64_t> queue{sy * mask.w + sx};
  seen[sy * mask.w + sx] = 1;
  while (!queue.empty()) {
    const std::int64_t p = queue.front();
    queue.pop_front();
    region.push_back(p);
    const std::int64_t y = p / mask.w, x = p % mask.w;
    const std::int64_t dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
    for (int d = 0; d < 4; ++d) {
      const std::int64_t ny = y + dy[d], nx = x + dx[d];
      if (ny < 0 || ny >= mask.h || nx < 0 || nx >= mask.w) continue;
      const std::int64_t np = ny * mask.w + nx;
      if (!mask.bits[np]) {
        touches = true;
      } else if (!seen[np]) {
        seen[np] = 1;
        queue.push_back(np);
      }
    }
  }
  return touches;
}

}  // namespace detail

// Iterative PDE gap filling: smoothness (Laplacian) transported along
// isophotes, interleaved with mask-confined anisotropic diffusion. Context
// pixels are never touched.
inline RasterImage navier_stokes_inpaint(const RasterImage& image,
                                         const ScanlineMask& mask,
                                         const NsConfig& cfg = {},
                                         NsReport* report = nullptr) {
  cfg.validate();
  if (image.h != mask.h || image.w != mask.w)
    shape_error("navier_stokes_inpaint: image/mask size mismatch");
  NsReport local;
  NsReport& rep = report ? *report : local;

  std::vector<std::int64_t> holes;
  for (std::int64_t i = 0; i < mask.h * mask.w; ++i)
    if (mask.bits[i]) holes.push_back(i);
  if (holes.empty()) {
    rep.converged = true;
    return image;  // nothing to inpaint
  }

  const std::int64_t H = image.h, W = image.w;
  // working copy in double, one plane per channel
  std::vector<std::vector<double>> planes(3, std::vector<double>(H * W));
  for (std::int64_t i = 0; i < H * W; ++i)
    for (int c = 0; c < 3; ++c) planes[c][i] = image.data[i * 3 + c];

  // context mean per channel, for isolated regions and initialization
  double ctx_mean[3] = {0, 0, 0};
  std::int64_t ctx_count = 0;
  for (std::int64_t i = 0; i < H * W; ++i)
    if (!mask.bits[i]) {
      for (int c = 0; c < 3; ++c) ctx_mean[c] += planes[c][i];
      ++ctx_count;
    }
  for (int c = 0; c < 3; ++c)
    ctx_mean[c] = ctx_count ? ctx_mean[c] / ctx_count : 0.5;

  {  // detect isolated regions (no observed neighbor anywhere)
    std::vector<std::uint8_t> seen(H * W, 0);
    for (auto p : holes) {
      if (seen[p]) continue;
      std::vector<std::int64_t> region;
      if (!detail::region_touches_context(mask, p / W, p % W, seen, region))
        rep.isolated_region_filled = true;
    }
  }

  // initialize holes from repeated neighbor averaging (context mean fallback)
  {
    std::vector<std::uint8_t> known(H * W);
    for (std::int64_t i = 0; i < H * W; ++i) known[i] = !mask.bits[i];
    std::vector<std::int64_t> frontier = holes;
    for (int pass = 0; pass < 64 && !frontier.empty(); ++pass) {
      std::vector<std::int64_t> next;
      std::vector<std::uint8_t> newly(H * W, 0);
      for (auto p : frontier) {
        const std::int64_t y = p / W, x = p % W;
        double acc[3] = {0, 0, 0};
        int n = 0;
        const std::int64_t dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
        for (int d = 0; d < 4; ++d) {
          const std::int64_t ny = y + dy[d], nx = x + dx[d];
          if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
          if (known[ny * W + nx]) {
            for (int c = 0; c < 3; ++c) acc[c] += planes[c][ny * W + nx];
            ++n;
          }
        }
        if (n > 0) {
          for (int c = 0; c < 3; ++c) planes[c][p] = acc[c] / n;
          newly[p] = 1;
        } else {
          next.push_back(p);
        }
      }
      for (std::int64_t i = 0; i < H * W; ++i)
        if (newly[i]) known[i] = 1;
      frontier = std::move(next);
    }
    for (auto p : frontier)  // isolated leftovers
      for (int c = 0; c < 3; ++c) planes[c][p] = ctx_mean[c];
  }

  std::vector<std::vector<double>> next = planes;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    double residual = 0;
    for (int c = 0; c < 3; ++c) {
      const auto& img = planes[c];
      auto at = [&](std::int64_t y, std::int64_t x) {
        return img[detail::clampi(y, H) * W + detail::clampi(x, W)];
      };
      auto lap = [&](std::int64_t y, std::int64_t x) {
        return at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) -
               4.0 * at(y, x);
      };
      for (auto p : holes) {
        const std::int64_t y = p / W, x = p % W;
        const double ix = (at(y, x + 1) - at(y, x - 1)) * 0.5;
        const double iy = (at(y + 1, x) - at(y - 1, x)) * 0.5;
        // transport of smoothness along the isophote tangent (-Iy, Ix)
        const double dlx = (lap(y, x + 1) - lap(y, x - 1)) * 0.5;
        const double dly = (lap(y + 1, x) - lap(y - 1, x)) * 0.5;
        const double gnorm = std::sqrt(ix * ix + iy * iy) + 1e-12;
        const double beta = (dlx * (-iy) + dly * ix) / gnorm;
        // anisotropic (gradient-damped) diffusion confined to the hole
        const double g = 1.0 / (1.0 + (ix * ix + iy * iy) * 4.0);
        double v = img[p] + cfg.dt * beta * std::sqrt(ix * ix + iy * iy) +
                   cfg.aniso_weight * cfg.dt * g * lap(y, x);
        v = std::min(1.0, std::max(0.0, v));
        residual += std::abs(v - img[p]);
        next[c][p] = v;
      }
    }
    for (int c = 0; c < 3; ++c)
      for (auto p : holes) planes[c][p] = next[c][p];
    residual /= static_cast<double>(holes.size() * 3);
    rep.residuals.push_back(residual);
    rep.iterations = iter + 1;
    if (residual < cfg.tol) {
      rep.converged = true;
      break;
    }
  }

  RasterImage out = image;
  for (auto p : holes)
    for (int c = 0; c < 3; ++c)
      out.data[p * 3 + c] = static_cast<float>(planes[c][p]);
  return out;
}

// ------------------------------------------------------------------------ U-Net

struct UNetConfig {
  int levels = 4;
  int base_channels = 32;
  bool skip_connections = true;

  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    detail::fnv_mix(h, 2);
    detail::fnv_mix(h, static_cast<std::uint64_t>(levels));
    detail::fnv_mix(h, static_cast<std::uint64_t>(base_channels));
    detail::fnv_mix(h, skip_connections ? 1 : 0);
    return h;
  }

  std::int64_t dim_divisor() const { return std::int64_t{1} << (levels - 1); }
};

// Encoder-decoder with pooling downsampling, transposed-conv upsampling and
// skip connections. Input is 4 channels: zero-filled RGB plus context mask.
template <typename T>
class UNet {
 public:
  UNet(const UNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    std::int64_t in_ch = 4;
    for (int lvl = 0; lvl < cfg.levels; ++lvl) {
      const std::int64_t ch = cfg.base_channels << lvl;
      const std::string tag = "enc" + std::to_string(lvl);
      enc1_.push_back(detail::ConvLayer<T>::create(params_, tag + ".c1", in_ch, ch, 3, rng));
      enc2_.push_back(detail::ConvLayer<T>::create(params_, tag + ".c2", ch, ch, 3, rng));
      in_ch = ch;
    }
    for (int lvl = cfg.levels - 2; lvl >= 0; --lvl) {
      const std::int64_t ch = cfg.base_channels << lvl;
      const std::int64_t deep = ch * 2;
      const std::string tag = "dec" + std::to_string(lvl);
      // transposed-conv kernel [in=deep, out=ch, 2, 2]
      up_.push_back(params_.add(
          tag + ".up", detail::init_uniform<T>({deep, ch, 2, 2}, deep * 4, rng)));
      const std::int64_t cat_ch = cfg.skip_connections ? ch * 2 : ch;
      dec1_.push_back(detail::ConvLayer<T>::create(params_, tag + ".c1", cat_ch, ch, 3, rng));
      dec2_.push_back(detail::ConvLayer<T>::create(params_, tag + ".c2", ch, ch, 3, rng));
    }
    head_ = detail::ConvLayer<T>::create(params_, "head", cfg.base_channels, 3, 1, rng);
  }

  const UNetConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }

  PredictionResult<T> forward(const Tensor<T>& corrupted,
                              const Tensor<T>& context_mask) const {
    const std::int64_t div = cfg_.dim_divisor();
    if (corrupted.dim(2) % div || corrupted.dim(3) % div)
      shape_error("unet_forward: input " + shape_str(corrupted.shape()) +
                  " dims must be divisible by " + std::to_string(div) +
                  "; pad to the next multiple");
    auto x = concat<T>({mul(corrupted, context_mask), context_mask}, 1);
    std::vector<Tensor<T>> skips;
    for (int lvl = 0; lvl < cfg_.levels; ++lvl) {
      x = relu(enc2_[lvl](relu(enc1_[lvl](x, 1, 1)), 1, 1));
      if (lvl + 1 < cfg_.levels) {
        skips.push_back(x);
        x = avg_pool2d(x, 2);
      }
    }
    for (std::size_t i = 0; i < up_.size(); ++i) {
      x = transposed_conv2d(x, up_[i], 2, 0);
      if (cfg_.skip_connections)
        x = concat<T>({x, skips[skips.size() - 1 - i]}, 1);
      x = relu(dec2_[i](relu(dec1_[i](x, 1, 1)), 1, 1));
    }
    auto mu = sigmoid(head_(x));
    PredictionResult<T> out;
    out.mu = mu;
    out.composited = composite(mu, corrupted, context_mask);
    return out;
  }

  Tensor<T> loss(const PredictionResult<T>& pred, const Tensor<T>& clean,
                 const MsSsimParams& p = {}) const {
    return ms_ssim_loss(pred.composited, clean, p);
  }

 private:
  UNetConfig cfg_;
  ParamStore<T> params_;
  std::vector<detail::ConvLayer<T>> enc1_, enc2_, dec1_, dec2_;
  std::vector<Tensor<T>> up_;
  detail::ConvLayer<T> head_;
};

// ------------------------------------------------------------------ PartialConv

// One partial convolution: output renormalized by observed window coverage,
// mask propagated (holes only shrink). The returned mask is detached data.
template <typename T>
struct PartialConvOut {
  Tensor<T> features;
  Tensor<T> mask;  // [B,1,H',W'] binary, not part of the gradient graph
};

template <typename T>
PartialConvOut<T> partial_conv2d(const Tensor<T>& features,
                                 const Tensor<T>& mask, const Tensor<T>& weight,
                                 const Tensor<T>& bias, std::int64_t stride = 1,
                                 std::int64_t pad = 0) {
  if (mask.rank() != 4 || mask.dim(1) != 1)
    shape_error("partial_conv2d mask must be [B,1,H,W]");
  if (mask.dim(2) != features.dim(2) || mask.dim(3) != features.dim(3))
    shape_error("partial_conv2d mask/features spatial mismatch");
  const std::int64_t kH = weight.dim(2), kW = weight.dim(3);
  auto masked = mul(features, mask);
  auto num = conv2d(masked, weight, stride, pad);
  // coverage counting with a constant ones kernel; no gradient flows here
  auto ones = Tensor<T>::full({1, 1, kH, kW}, T(1));
  auto coverage = conv2d(mask.detach(), ones, stride, pad);
  auto ratio = Tensor<T>::zeros(coverage.shape());
  auto next_mask = Tensor<T>::zeros(coverage.shape());
  const T window = static_cast<T>(kH * kW);
  for (std::size_t i = 0; i < coverage.data().size(); ++i) {
    const T cov = coverage.data()[i];
    if (cov > T(0)) {
      ratio.data()[i] = window / cov;
      next_mask.data()[i] = T(1);
    }
  }
  // zero out fully-hole windows including the bias
  auto out = mul(add(mul(num, ratio), bias), next_mask);
  return {out, next_mask};
}

struct PartialConvConfig {
  int levels = 3;
  int base_channels = 32;

  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    detail::fnv_mix(h, 3);
    detail::fnv_mix(h, static_cast<std::uint64_t>(levels));
    detail::fnv_mix(h, static_cast<std::uint64_t>(base_channels));
    return h;
  }

  std::int64_t dim_divisor() const { return std::int64_t{1} << (levels - 1); }
};

struct PartialConvLossWeights {
  double valid = 1.0;
  double hole = 6.0;
  double tv = 0.1;
};

// U-Net-shaped stack of partial convolutions: stride-2 partial convs down,
// nearest upsampling with skip concatenation up, masks propagated alongside.
template <typename T>
class PartialConvNet {
 public:
  PartialConvNet(const PartialConvConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    std::int64_t in_ch = 3;
    for (int lvl = 0; lvl < cfg.levels; ++lvl) {
      // level 0 keeps full resolution, deeper levels downsample by 2
      const std::int64_t ch = cfg.base_channels << lvl;
      add_pconv("enc" + std::to_string(lvl), in_ch, ch, rng);
      in_ch = ch;
    }
    for (int lvl = cfg.levels - 2; lvl >= 0; --lvl) {
      const std::int64_t ch = cfg.base_channels << lvl;
      add_pconv("dec" + std::to_string(lvl), ch * 2 + ch, ch, rng);
    }
    head_ = detail::ConvLayer<T>::create(params_, "head", cfg.base_channels, 3, 1, rng);
  }

  const PartialConvConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }

  PredictionResult<T> forward(const Tensor<T>& corrupted,
                              const Tensor<T>& context_mask) const {
    const std::int64_t div = cfg_.dim_divisor();
    if (corrupted.dim(2) % div || corrupted.dim(3) % div)
      shape_error("partialconv_forward: input dims must be divisible by " +
                  std::to_string(div));
    auto x = mul(corrupted, context_mask);
    auto m = context_mask.detach();
    std::vector<Tensor<T>> skips, skip_masks;
    std::size_t li = 0;
    for (int lvl = 0; lvl < cfg_.levels; ++lvl, ++li) {
      auto pc = partial_conv2d(x, m, weights_[li], biases_[li],
                               lvl == 0 ? 1 : 2, 1);
      x = relu(pc.features);
      m = pc.mask;
      if (lvl + 1 < cfg_.levels) {
        skips.push_back(x);
        skip_masks.push_back(m);
      }
    }
    for (int lvl = cfg_.levels - 2; lvl >= 0; --lvl, ++li) {
      x = upsample_nearest(x, 2);
      m = upsample_nearest(m, 2);
      // after concat the window is observed if either branch is
      auto merged = m.detach();
      const auto& sm = skip_masks[lvl].data();
      for (std::size_t i = 0; i < merged.data().size(); ++i)
        merged.data()[i] = std::max(merged.data()[i], sm[i]);
      x = concat<T>({x, skips[lvl]}, 1);
      auto pc = partial_conv2d(x, merged, weights_[li], biases_[li], 1, 1);
      x = relu(pc.features);
      m = pc.mask;
    }
    auto mu = sigmoid(head_(x));
    PredictionResult<T> out;
    out.mu = mu;
    out.composited = composite(mu, corrupted, context_mask);
    return out;
  }

  // L1 on valid and hole pixels plus total variation on the hole-dilated
  // region, on the composited image. Perceptual/style terms are not used.
  Tensor<T> loss(const PredictionResult<T>& pred, const Tensor<T>& clean,
                 const Tensor<T>& context_mask,
                 const PartialConvLossWeights& w = {}) const {
    auto diff = abs(sub(pred.composited, clean));
    const auto& mv = context_mask.data();
    T valid_n = 0, hole_n = 0;
    for (T v : mv) (v > T(0) ? valid_n : hole_n) += 1;
    auto hole_mask = Tensor<T>::scalar(T(1)) - context_mask;
    auto l_valid = sum(mul(diff, context_mask)) *
                   (T(1) / std::max(T(1), valid_n * 3));
    auto l_hole = sum(mul(diff, hole_mask)) * (T(1) / std::max(T(1), hole_n * 3));

    // 1-px dilation of the hole region
    const std::int64_t H = context_mask.dim(2), W = context_mask.dim(3);
    auto region = Tensor<T>::zeros(context_mask.shape());
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t x = 0; x < W; ++x) {
        bool hit = false;
        for (std::int64_t dy = -1; dy <= 1 && !hit; ++dy)
          for (std::int64_t dx = -1; dx <= 1 && !hit; ++dx) {
            const std::int64_t ny = detail::clampi(y + dy, H);
            const std::int64_t nx = detail::clampi(x + dx, W);
            if (mv[ny * W + nx] == T(0)) hit = true;
          }
        if (hit) region.data()[y * W + x] = T(1);
      }
    T region_n = 0;
    for (T v : region.data()) region_n += v;
    const auto& img = pred.composited;
    auto dx = sub(narrow(img, 3, 1, W - 1), narrow(img, 3, 0, W - 1));
    auto dy = sub(narrow(img, 2, 1, H - 1), narrow(img, 2, 0, H - 1));
    auto rx = narrow(region, 3, 0, W - 1);
    auto ry = narrow(region, 2, 0, H - 1);
    auto l_tv = (sum(mul(abs(dx), rx)) + sum(mul(abs(dy), ry))) *
                (T(1) / std::max(T(1), region_n * 3));
    return l_valid * static_cast<T>(w.valid) + l_hole * static_cast<T>(w.hole) +
           l_tv * static_cast<T>(w.tv);
  }

 private:
  void add_pconv(const std::string& name, std::int64_t ci, std::int64_t co,
                 Rng& rng) {
    weights_.push_back(params_.add(
        name + ".w", detail::init_uniform<T>({co, ci, 3, 3}, ci * 9, rng)));
    biases_.push_back(params_.add(name + ".b", Tensor<T>::zeros({co, 1, 1})));
  }

  PartialConvConfig cfg_;
  ParamStore<T> params_;
  std::vector<Tensor<T>> weights_, biases_;
  detail::ConvLayer<T> head_;
};

}  // namespace scanfill

#endif  // SCANFILL_BASELINES_HPP
