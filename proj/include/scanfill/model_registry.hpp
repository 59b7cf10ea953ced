#ifndef SCANFILL_MODEL_REGISTRY_HPP
#define SCANFILL_MODEL_REGISTRY_HPP

#include <variant>

#include "scanfill/baselines.hpp"
#include "scanfill/np_models.hpp"

namespace scanfill {

// Architecture settings for every trainable model, so one config object can
// describe any of them; only the block matching the kind is consulted.
struct ModelHyperparams {
  ConvCnpConfig cnp;
  ConvLnpConfig lnp;
  UNetConfig unet;
  PartialConvConfig pconv;

  std::uint64_t fingerprint(ModelKind kind) const {
    switch (kind) {
      case ModelKind::kConvCnp: return cnp.fingerprint();
      case ModelKind::kConvLnp: return lnp.fingerprint();
      case ModelKind::kUNet: return unet.fingerprint();
      case ModelKind::kPartialConv: return pconv.fingerprint();
    }
    shape_error("unknown model kind");
  }
};

// Uniform handle over the four trainable models: one forward/loss/params
// surface for the training loop, evaluation and checkpointing.
template <typename T>
class AnyModel {
 public:
  AnyModel(ModelKind kind, const ModelHyperparams& hp, std::uint64_t seed)
      : kind_(kind), hp_(hp), impl_(make(kind, hp, seed)) {}

  ModelKind kind() const { return kind_; }
  std::uint64_t fingerprint() const { return hp_.fingerprint(kind_); }
  const ModelHyperparams& hyperparams() const { return hp_; }

  ParamStore<T>& params() {
    return std::visit([](auto& m) -> ParamStore<T>& { return m.params(); },
                      impl_);
  }

  // latent_samples and sample_seed only matter for the latent model
  PredictionResult<T> forward(const Tensor<T>& corrupted,
                              const Tensor<T>& context_mask,
                              int latent_samples = 1,
                              std::uint64_t sample_seed = 0) const {
    return std::visit(
        [&](const auto& m) -> PredictionResult<T> {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ConvLnp<T>>)
            return m.forward(corrupted, context_mask, latent_samples,
                             sample_seed);
          else
            return m.forward(corrupted, context_mask);
        },
        impl_);
  }

  Tensor<T> loss(const PredictionResult<T>& pred, const Tensor<T>& clean,
                 const Tensor<T>& context_mask) const {
    return std::visit(
        [&](const auto& m) -> Tensor<T> {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>,
                                       PartialConvNet<T>>)
            return m.loss(pred, clean, context_mask);
          else
            return m.loss(pred, clean);
        },
        impl_);
  }

 private:
  using Impl = std::variant<ConvCnp<T>, ConvLnp<T>, UNet<T>, PartialConvNet<T>>;

  static Impl make(ModelKind kind, const ModelHyperparams& hp,
                   std::uint64_t seed) {
    switch (kind) {
      case ModelKind::kConvCnp: return ConvCnp<T>(hp.cnp, seed);
      case ModelKind::kConvLnp: return ConvLnp<T>(hp.lnp, seed);
      case ModelKind::kUNet: return UNet<T>(hp.unet, seed);
      case ModelKind::kPartialConv: return PartialConvNet<T>(hp.pconv, seed);
    }
    shape_error("unknown model kind");
  }

  ModelKind kind_;
  ModelHyperparams hp_;
  Impl impl_;
};

}  // namespace scanfill

#endif  // SCANFILL_MODEL_REGISTRY_HPP
