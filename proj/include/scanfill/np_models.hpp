#ifndef SCANFILL_NP_MODELS_HPP
#define SCANFILL_NP_MODELS_HPP

#include <map>
#include <string>

#include "scanfill/image.hpp"
#include "scanfill/metrics.hpp"
#include "scanfill/nn.hpp"
#include "scanfill/rng.hpp"

namespace scanfill {

inline constexpr double kDensityEpsilon = 1e-8;   // SetConv normalization guard
inline constexpr double kKernelPositivity = 1e-8; // |w| + eps keeps kernel > 0

enum class ModelKind : std::uint8_t {
  kConvCnp = 0,
  kConvLnp = 1,
  kUNet = 2,
  kPartialConv = 3,
};

inline const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kConvCnp: return "convcnp";
    case ModelKind::kConvLnp: return "convlnp";
    case ModelKind::kUNet: return "unet";
    case ModelKind::kPartialConv: return "partialconv";
  }
  return "?";
}

inline ModelKind model_kind_from_name(const std::string& s) {
  if (s == "convcnp") return ModelKind::kConvCnp;
  if (s == "convlnp") return ModelKind::kConvLnp;
  if (s == "unet") return ModelKind::kUNet;
  if (s == "partialconv") return ModelKind::kPartialConv;
  shape_error("unknown model kind '" + s + "'");
}

// Named trainable tensors with deterministic iteration order.
template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    t.set_requires_grad();
    auto [it, fresh] = items_.emplace(name, std::move(t));
    if (!fresh) shape_error("duplicate parameter name " + name);
    return it->second;
  }

  Tensor<T>& at(const std::string& name) {
    auto it = items_.find(name);
    if (it == items_.end()) shape_error("unknown parameter " + name);
    return it->second;
  }

  std::vector<Tensor<T>> tensors() {
    std::vector<Tensor<T>> out;
    for (auto& [name, t] : items_) out.push_back(t);
    return out;
  }

  void zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

  const std::map<std::string, Tensor<T>>& named() const { return items_; }
  std::map<std::string, Tensor<T>>& named() { return items_; }

 private:
  std::map<std::string, Tensor<T>> items_;
};

namespace detail {

// centered uniform fan-in init
template <typename T>
Tensor<T> init_uniform(Shape s, std::int64_t fan_in, Rng& rng) {
  auto t = Tensor<T>::zeros(std::move(s));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
struct ConvLayer {
  Tensor<T> w;  // [Co,Ci,k,k]
  Tensor<T> b;  // [Co,1,1]

  static ConvLayer create(ParamStore<T>& ps, const std::string& name,
                          std::int64_t ci, std::int64_t co, std::int64_t k,
                          Rng& rng) {
    ConvLayer l;
    l.w = ps.add(name + ".w", init_uniform<T>({co, ci, k, k}, ci * k * k, rng));
    l.b = ps.add(name + ".b", Tensor<T>::zeros({co, 1, 1}));
    return l;
  }

  Tensor<T> operator()(const Tensor<T>& x, std::int64_t stride = 1,
                       std::int64_t pad = 0) const {
    return add(conv2d(x, w, stride, pad), b);
  }
};

// pre-activation residual block, two 3x3 convs, constant width
template <typename T>
struct ResBlock {
  ConvLayer<T> c1, c2;

  static ResBlock create(ParamStore<T>& ps, const std::string& name,
                         std::int64_t ch, Rng& rng) {
    return {ConvLayer<T>::create(ps, name + ".c1", ch, ch, 3, rng),
            ConvLayer<T>::create(ps, name + ".c2", ch, ch, 3, rng)};
  }

  Tensor<T> operator()(const Tensor<T>& x) const {
    return add(x, c2(relu(c1(relu(x), 1, 1)), 1, 1));
  }
};

// residual trunk: one input conv to `ch` channels, then layers/2 blocks
template <typename T>
struct ResTrunk {
  ConvLayer<T> in;
  std::vector<ResBlock<T>> blocks;

  static ResTrunk create(ParamStore<T>& ps, const std::string& name,
                         std::int64_t ci, std::int64_t ch, int layers,
                         Rng& rng) {
    ResTrunk t;
    t.in = ConvLayer<T>::create(ps, name + ".in", ci, ch, 3, rng);
    for (int i = 0; i < layers / 2; ++i)
      t.blocks.push_back(
          ResBlock<T>::create(ps, name + ".block" + std::to_string(i), ch, rng));
    return t;
  }

  Tensor<T> operator()(Tensor<T> x) const {
    x = in(x, 1, 1);
    for (const auto& b : blocks) x = b(x);
    return x;
  }
};

// pointwise decoder MLP realized as 1x1 convs with relu between layers
template <typename T>
struct PointwiseMlp {
  std::vector<ConvLayer<T>> layers;

  static PointwiseMlp create(ParamStore<T>& ps, const std::string& name,
                             std::int64_t ci, std::int64_t hidden,
                             std::int64_t co, int depth, Rng& rng) {
    PointwiseMlp m;
    for (int i = 0; i < depth; ++i) {
      const std::int64_t in_ch = i == 0 ? ci : hidden;
      const std::int64_t out_ch = i + 1 == depth ? co : hidden;
      m.layers.push_back(ConvLayer<T>::create(
          ps, name + ".l" + std::to_string(i), in_ch, out_ch, 1, rng));
    }
    return m;
  }

  Tensor<T> operator()(Tensor<T> x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](x);
      if (i + 1 < layers.size()) x = relu(x);
    }
    return x;
  }
};

inline void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
}

}  // namespace detail

// SetConv output: density channel plus density-normalized signal channels.
template <typename T>
struct FunctionalRepresentation {
  Tensor<T> density;  // [1,1,H,W], unnormalized
  Tensor<T> signal;   // [1,3,H,W], normalized by density
  bool empty_context = false;

  Tensor<T> grid() const { return concat<T>({density, signal}, 1); }
};

// SetConv: positively-constrained smoothing of [M_C, M_C*I] with density
// normalization of the signal channels.
template <typename T>
FunctionalRepresentation<T> set_conv(const Tensor<T>& image,
                                     const Tensor<T>& context_mask,
                                     const Tensor<T>& raw_kernel) {
  if (image.rank() != 4 || context_mask.rank() != 4 ||
      image.dim(2) != context_mask.dim(2) ||
      image.dim(3) != context_mask.dim(3))
    shape_error("set_conv: image " + shape_str(image.shape()) +
                " vs mask " + shape_str(context_mask.shape()));
  const std::int64_t k = raw_kernel.dim(0);
  const std::int64_t pad = (k - 1) / 2;
  auto kernel = abs(raw_kernel) + static_cast<T>(kKernelPositivity);
  auto masked = mul(image, context_mask);
  auto phi = concat<T>({context_mask, masked}, 1);
  auto r = depthwise_conv2d(phi, kernel, pad);
  FunctionalRepresentation<T> rep;
  rep.density = narrow(r, 1, 0, 1);
  rep.signal = div(narrow(r, 1, 1, 3),
                   rep.density + static_cast<T>(kDensityEpsilon));
  T mask_sum = 0;
  for (T v : context_mask.data()) mask_sum += v;
  rep.empty_context = mask_sum == T(0);
  return rep;
}

struct ConvCnpConfig {
  int setconv_kernel = 9;
  int trunk_channels = 128;
  int trunk_layers = 10;
  int decoder_layers = 4;
  int decoder_hidden = 128;

  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    detail::fnv_mix(h, 0);  // model kind
    for (int v : {setconv_kernel, trunk_channels, trunk_layers, decoder_layers,
                  decoder_hidden})
      detail::fnv_mix(h, static_cast<std::uint64_t>(v));
    return h;
  }

  std::int64_t receptive_radius() const {
    return (setconv_kernel - 1) / 2 + 1 + trunk_layers;
  }
};

struct ConvLnpConfig {
  int setconv_kernel = 9;
  int trunk_channels = 64;  // each of the two 8-layer trunks
  int trunk_layers = 8;
  int latent_channels = 16;
  int decoder_layers = 4;
  int decoder_hidden = 128;
  double logvar_clamp = 10.0;

  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    detail::fnv_mix(h, 1);
    for (int v : {setconv_kernel, trunk_channels, trunk_layers, latent_channels,
                  decoder_layers, decoder_hidden})
      detail::fnv_mix(h, static_cast<std::uint64_t>(v));
    return h;
  }
};

template <typename T>
struct PredictionResult {
  Tensor<T> mu;                      // mean prediction(s), [1,3,H,W]
  Tensor<T> composited;              // context pixels overwritten from input
  std::vector<Tensor<T>> samples;    // per-sample composited outputs (ConvLNP)
  bool empty_context = false;
};

template <typename T>
class ConvCnp {
 public:
  ConvCnp(const ConvCnpConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    raw_kernel_ = params_.add(
        "setconv.kernel",
        detail::init_uniform<T>({cfg.setconv_kernel, cfg.setconv_kernel},
                                cfg.setconv_kernel * cfg.setconv_kernel, rng));
    trunk_ = detail::ResTrunk<T>::create(params_, "trunk", 4,
                                         cfg.trunk_channels, cfg.trunk_layers,
                                         rng);
    decoder_ = detail::PointwiseMlp<T>::create(
        params_, "decoder", cfg.trunk_channels, cfg.decoder_hidden, 3,
        cfg.decoder_layers, rng);
  }

  const ConvCnpConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }

  // effective kernel, strictly positive for any checkpoint
  Tensor<T> effective_kernel() const {
    return abs(raw_kernel_) + static_cast<T>(kKernelPositivity);
  }

  PredictionResult<T> forward(const Tensor<T>& corrupted,
                              const Tensor<T>& context_mask) const {
    auto rep = set_conv(corrupted, context_mask, raw_kernel_);
    auto h = trunk_(rep.grid());
    auto mu = sigmoid(decoder_(h));
    PredictionResult<T> out;
    out.mu = mu;
    out.composited = composite(mu, corrupted, context_mask);
    out.empty_context = rep.empty_context;
    return out;
  }

  Tensor<T> loss(const PredictionResult<T>& pred, const Tensor<T>& clean,
                 const MsSsimParams& p = {}) const {
    return ms_ssim_loss(pred.composited, clean, p);
  }

 private:
  ConvCnpConfig cfg_;
  ParamStore<T> params_;
  Tensor<T> raw_kernel_;
  detail::ResTrunk<T> trunk_;
  detail::PointwiseMlp<T> decoder_;
};

template <typename T>
struct LatentField {
  Tensor<T> mean;     // [1,Cz,H,W]
  Tensor<T> log_var;  // [1,Cz,H,W], clamped
};

template <typename T>
class ConvLnp {
 public:
  ConvLnp(const ConvLnpConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    Rng rng(seed);
    raw_kernel_ = params_.add(
        "setconv.kernel",
        detail::init_uniform<T>({cfg.setconv_kernel, cfg.setconv_kernel},
                                cfg.setconv_kernel * cfg.setconv_kernel, rng));
    encoder_ = detail::ResTrunk<T>::create(params_, "encoder", 4,
                                           cfg.trunk_channels, cfg.trunk_layers,
                                           rng);
    latent_head_ = detail::ConvLayer<T>::create(
        params_, "latent_head", cfg.trunk_channels, 2 * cfg.latent_channels, 1,
        rng);
    decoder_trunk_ = detail::ResTrunk<T>::create(
        params_, "decoder_trunk", cfg.latent_channels, cfg.trunk_channels,
        cfg.trunk_layers, rng);
    decoder_ = detail::PointwiseMlp<T>::create(
        params_, "decoder", cfg.trunk_channels, cfg.decoder_hidden, 3,
        cfg.decoder_layers, rng);
  }

  const ConvLnpConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }

  LatentField<T> encode(const Tensor<T>& corrupted,
                        const Tensor<T>& context_mask) const {
    auto rep = set_conv(corrupted, context_mask, raw_kernel_);
    auto h = latent_head_(encoder_(rep.grid()));
    LatentField<T> lf;
    lf.mean = narrow(h, 1, 0, cfg_.latent_channels);
    lf.log_var = clamp(narrow(h, 1, cfg_.latent_channels, cfg_.latent_channels),
                       static_cast<T>(-cfg_.logvar_clamp),
                       static_cast<T>(cfg_.logvar_clamp));
    return lf;
  }

  Tensor<T> decode(const Tensor<T>& z) const {
    return sigmoid(decoder_(decoder_trunk_(z)));
  }

  // L reparameterized samples, each decoded and composited; mu is the
  // arithmetic mean of the composited samples
  PredictionResult<T> forward(const Tensor<T>& corrupted,
                              const Tensor<T>& context_mask, int num_samples,
                              std::uint64_t seed) const {
    if (num_samples < 1) shape_error("convlnp_forward: L must be >= 1");
    auto lf = encode(corrupted, context_mask);
    Rng rng(seed);
    PredictionResult<T> out;
    auto std_dev = exp(lf.log_var * static_cast<T>(0.5));
    Tensor<T> acc;
    for (int l = 0; l < num_samples; ++l) {
      auto noise = Tensor<T>::zeros(lf.mean.shape());
      for (auto& v : noise.data()) v = static_cast<T>(rng.normal());
      auto z = add(lf.mean, mul(std_dev, noise));
      auto sample = composite(decode(z), corrupted, context_mask);
      out.samples.push_back(sample);
      acc = l == 0 ? sample : add(acc, sample);
    }
    out.composited = acc * (T(1) / static_cast<T>(num_samples));
    out.mu = out.composited;
    T mask_sum = 0;
    for (T v : context_mask.data()) mask_sum += v;
    out.empty_context = mask_sum == T(0);
    return out;
  }

  // mean over samples of (1 - ms_ssim(sample, clean))
  Tensor<T> loss(const PredictionResult<T>& pred, const Tensor<T>& clean,
                 const MsSsimParams& p = {}) const {
    Tensor<T> acc;
    for (std::size_t l = 0; l < pred.samples.size(); ++l) {
      auto term = ms_ssim_loss(pred.samples[l], clean, p);
      acc = l == 0 ? term : add(acc, term);
    }
    return acc * (T(1) / static_cast<T>(pred.samples.size()));
  }

 private:
  ConvLnpConfig cfg_;
  ParamStore<T> params_;
  Tensor<T> raw_kernel_;
  detail::ResTrunk<T> encoder_;
  detail::ConvLayer<T> latent_head_;
  detail::ResTrunk<T> decoder_trunk_;
  detail::PointwiseMlp<T> decoder_;
};

}  // namespace scanfill

#endif  // SCANFILL_NP_MODELS_HPP
