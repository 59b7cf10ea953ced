#ifndef SCANFILL_DOWNSTREAM_HPP
#define SCANFILL_DOWNSTREAM_HPP

#include "scanfill/training.hpp"

namespace scanfill {

struct SyntheticTaskSpec {
  double scale_a = 10.0;
  std::uint64_t f_seed = 0;  // frozen label network
  std::uint64_t g_seed = 1;  // trainable regressor init
  int image_size = 64;

  void validate() const {
    if (scale_a <= 0) shape_error("SyntheticTaskSpec: scale a must be > 0");
    if (f_seed == g_seed)
      shape_error("SyntheticTaskSpec: label and regressor seeds must differ");
  }
};

struct RegressorConfig {
  int epochs = 300;
  int batch_size = 8;
  double lr = 0.001;
  double plateau_factor = 0.1;
  int plateau_patience = 3;
  int early_stop_patience = 8;
  double early_stop_threshold = 1e-4;

  void validate() const {
    if (epochs < 1 || batch_size < 1 || lr <= 0 || plateau_factor <= 0 ||
        plateau_patience < 1 || early_stop_patience < 1 ||
        early_stop_threshold <= 0)
      shape_error("RegressorConfig: all fields must be positive");
  }
};

// Small CNN mapping a [1,3,H,W] image to one scalar: two 3x3 convs with 2x2
// average pooling after each, then a fully connected head. Used both as the
// frozen label network f and (freshly seeded) as the trainable regressor g.
template <typename T>
class ScalarCnn {
 public:
  ScalarCnn(std::int64_t image_size, std::uint64_t seed) : size_(image_size) {
    if (image_size % 4 != 0)
      shape_error("ScalarCnn: image size must be divisible by 4");
    Rng rng(seed);
    c1_ = detail::ConvLayer<T>::create(params_, "c1", 3, 8, 3, rng);
    c2_ = detail::ConvLayer<T>::create(params_, "c2", 8, 16, 3, rng);
    const std::int64_t flat = 16 * (image_size / 4) * (image_size / 4);
    fc_w_ = params_.add("fc.w", detail::init_uniform<T>({flat, 1}, flat, rng));
    fc_b_ = params_.add("fc.b", Tensor<T>::zeros({1}));
  }

  ParamStore<T>& params() { return params_; }
  std::int64_t image_size() const { return size_; }

  Tensor<T> forward(const Tensor<T>& image) const {
    if (image.dim(2) != size_ || image.dim(3) != size_)
      shape_error("ScalarCnn: expected " + std::to_string(size_) + "x" +
                  std::to_string(size_) + " input, got " +
                  shape_str(image.shape()));
    auto h = avg_pool2d(relu(c1_(image, 1, 1)), 2);
    h = avg_pool2d(relu(c2_(h, 1, 1)), 2);
    auto flat = reshape(h, {1, h.numel()});
    return reshape(linear(flat, fc_w_, fc_b_), {});
  }

 private:
  std::int64_t size_;
  ParamStore<T> params_;
  detail::ConvLayer<T> c1_, c2_;
  Tensor<T> fc_w_, fc_b_;
};

// labels come from the frozen network applied to the scaled clean images
template <typename T>
std::vector<double> make_labels(const ScalarCnn<T>& f,
                                const std::vector<Tensor<T>>& images,
                                double scale_a) {
  std::vector<double> labels;
  for (const auto& img : images) {
    const double y = f.forward(img * static_cast<T>(scale_a)).item();
    if (!std::isfinite(y)) shape_error("make_labels: non-finite label");
    labels.push_back(y);
  }
  return labels;
}

struct FoldOutcome {
  int fold = 0;
  bool failed = false;       // non-finite loss aborted the fold
  std::string fail_reason;
  double test_mape = 0.0;    // valid only when !failed
  int epochs_run = 0;
  bool early_stopped = false;
};

struct RegressionResult {
  std::vector<FoldOutcome> folds;

  std::vector<double> mapes() const {
    std::vector<double> out;
    for (const auto& f : folds)
      if (!f.failed) out.push_back(f.test_mape);
    return out;
  }
};

// Trains one regressor per CV fold with MSE loss, plateau LR reduction and
// early stopping, then reports the held-out MAPE. Every caller-supplied
// variant reuses the same g_seed and fold split so comparisons are paired.
template <typename T>
RegressionResult train_regressor(std::uint64_t g_seed,
                                 const std::vector<Tensor<T>>& inputs,
                                 const std::vector<double>& labels,
                                 const std::vector<int>& folds,
                                 const RegressorConfig& cfg = {}, int k = 5) {
  cfg.validate();
  if (inputs.empty() || inputs.size() != labels.size() ||
      folds.size() != inputs.size())
    shape_error("train_regressor: inputs, labels and folds must align");
  const std::int64_t size = inputs[0].dim(2);

  RegressionResult result;
  for (int fold = 0; fold < k; ++fold) {
    FoldOutcome out;
    out.fold = fold;
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < inputs.size(); ++i)
      (folds[i] == fold ? test_idx : train_idx).push_back(i);
    if (train_idx.empty() || test_idx.empty()) {
      out.failed = true;
      out.fail_reason = "empty train or test split";
      result.folds.push_back(out);
      continue;
    }

    ScalarCnn<T> g(size, g_seed + static_cast<std::uint64_t>(fold));
    auto params = g.params().tensors();
    AdamState<T> opt;
    double lr = cfg.lr;
    double best_loss = std::numeric_limits<double>::infinity();
    int plateau_count = 0, stall_count = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      Rng shuffle_rng(g_seed * 0x9e3779b97f4a7c15ull + fold * 131 + epoch);
      std::vector<std::size_t> order = train_idx;
      for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[shuffle_rng.below(i + 1)]);

      double epoch_loss = 0;
      bool bad = false;
      for (std::size_t start = 0; start < order.size();
           start += cfg.batch_size) {
        const std::size_t end =
            std::min(order.size(), start + cfg.batch_size);
        const T inv = T(1) / static_cast<T>(end - start);
        g.params().zero_grads();
        for (std::size_t bi = start; bi < end; ++bi) {
          const std::size_t i = order[bi];
          auto err = g.forward(inputs[i]) - static_cast<T>(labels[i]);
          auto loss = square(err);
          const double lv = loss.item();
          if (!std::isfinite(lv)) {
            bad = true;
            break;
          }
          epoch_loss += lv;
          backward(loss * inv, /*accumulate=*/true);
        }
        if (bad) break;
        if (!adam_step(params, opt, static_cast<T>(lr)).applied) {
          bad = true;
          break;
        }
      }
      if (bad) {
        out.failed = true;
        out.fail_reason = "non-finite loss at epoch " + std::to_string(epoch);
        break;
      }
      epoch_loss /= static_cast<double>(order.size());
      out.epochs_run = epoch + 1;

      if (epoch_loss < best_loss - cfg.early_stop_threshold) {
        best_loss = epoch_loss;
        plateau_count = 0;
        stall_count = 0;
      } else {
        ++plateau_count;
        ++stall_count;
        if (plateau_count >= cfg.plateau_patience) {
          lr *= cfg.plateau_factor;
          plateau_count = 0;
        }
        if (stall_count >= cfg.early_stop_patience) {
          out.early_stopped = true;
          break;
        }
      }
    }

    if (!out.failed) {
      std::vector<double> pred, truth;
      for (auto i : test_idx) {
        pred.push_back(g.forward(inputs[i]).item());
        truth.push_back(labels[i]);
      }
      const auto m = mape(pred, truth);
      out.test_mape = m.value;
      if (!std::isfinite(out.test_mape)) {
        out.failed = true;
        out.fail_reason = "non-finite test MAPE";
      }
    }
    result.folds.push_back(out);
  }
  return result;
}

// One named input variant for the downstream comparison (clean images,
// zero-filled scanline images, or a method's inpainted outputs).
template <typename T>
struct DownstreamVariant {
  std::string name;
  std::vector<Tensor<T>> inputs;
};

// Full comparison: shared labels from the frozen f, one paired regression per
// variant, MAPE rows in the common score-table schema.
template <typename T>
ScoreTable compare_variants(const SyntheticTaskSpec& spec,
                            const std::vector<DownstreamVariant<T>>& variants,
                            const std::vector<Tensor<T>>& clean_images,
                            const std::vector<int>& folds,
                            const std::string& region = "synthetic",
                            const RegressorConfig& cfg = {}) {
  spec.validate();
  ScalarCnn<T> f(spec.image_size, spec.f_seed);
  const auto labels = make_labels(f, clean_images, spec.scale_a);
  ScoreTable table;
  for (const auto& variant : variants) {
    auto res = train_regressor(spec.g_seed, variant.inputs, labels, folds, cfg);
    for (const auto& fo : res.folds) {
      if (fo.failed) continue;  // failed folds surface via the sidecar
      ScoreRow row;
      row.model = variant.name;
      row.region = region;
      row.fold = fo.fold;
      row.image_id = "fold" + std::to_string(fo.fold);
      row.metric = "mape";
      row.value = fo.test_mape;
      row.seed = spec.g_seed;
      table.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace scanfill

#endif  // SCANFILL_DOWNSTREAM_HPP
