#ifndef SCANFILL_TRAINING_HPP
#define SCANFILL_TRAINING_HPP

#include <chrono>
#include <functional>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "scanfill/data.hpp"
#include "scanfill/model_registry.hpp"
#include "scanfill/optim.hpp"
#include "scanfill/scores.hpp"
#include "scanfill/synth.hpp"

namespace scanfill {

struct TrainConfig {
  ModelKind model = ModelKind::kConvCnp;
  int epochs = 400;
  int batch_size = 8;
  double base_lr = 1e-4;
  bool lr_decay = true;       // exponential decay by a total factor of 5
  double decay_factor = 5.0;
  int latent_samples_train = 4;
  int latent_samples_eval = 8;
  std::uint64_t seed = 0;
  int image_size = 128;
  ModelHyperparams arch;

  // published per-size latent sampling: 64px runs use 16/32 samples,
  // 128px runs use 4/8 with the shorter 200-epoch schedule
  static TrainConfig defaults_for(ModelKind kind, int image_size) {
    TrainConfig cfg;
    cfg.model = kind;
    cfg.image_size = image_size;
    if (kind == ModelKind::kConvLnp) {
      cfg.epochs = 200;
      cfg.batch_size = 4;
      if (image_size <= 64) {
        cfg.latent_samples_train = 16;
        cfg.latent_samples_eval = 32;
      }
    }
    return cfg;
  }

  LrSchedule schedule() const {
    LrSchedule s;
    s.base_lr = base_lr;
    s.mode = lr_decay ? LrSchedule::Mode::kExponentialDecay
                      : LrSchedule::Mode::kConstant;
    s.decay_factor = decay_factor;
    s.horizon = std::max(1, epochs);
    return s;
  }

  void validate() const {
    if (epochs < 1 || batch_size < 1) shape_error("TrainConfig: epochs and batch_size must be >= 1");
    if (base_lr <= 0) shape_error("TrainConfig: base_lr must be > 0");
    if (latent_samples_train < 1 || latent_samples_eval < 1)
      shape_error("TrainConfig: latent sample counts must be >= 1");
  }
};

template <typename T>
struct TrainDataset {
  std::vector<std::string> ids;
  std::vector<Tensor<T>> images;    // each [1,3,H,W] clean
  std::vector<std::string> regions; // optional, defaults applied when empty
  std::vector<int> folds;           // optional

  std::size_t size() const { return images.size(); }
  std::string region_of(std::size_t i) const {
    return i < regions.size() ? regions[i] : "synthetic";
  }
  int fold_of(std::size_t i) const {
    return i < folds.size() ? folds[i] : 0;
  }
};

template <typename T>
TrainDataset<T> dataset_from_corpus(const SynthCorpus& corpus,
                                    const std::string& region = "synthetic") {
  TrainDataset<T> d;
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    d.ids.push_back(corpus.ids[i]);
    d.images.push_back(corpus.images[i].template to_tensor<T>());
    d.regions.push_back(region);
  }
  return d;
}

template <typename T>
TrainDataset<T> dataset_from_manifest(const DatasetManifest& manifest) {
  TrainDataset<T> d;
  for (const auto& rec : manifest.records) {
    d.ids.push_back(rec.id);
    d.images.push_back(rec.pixels.template to_tensor<T>());
    d.regions.push_back(rec.region);
    d.folds.push_back(rec.fold);
  }
  return d;
}

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  std::int64_t wall_ms = 0;
};

template <typename T>
using ParamSnapshot = std::map<std::string, std::vector<T>>;

template <typename T>
ParamSnapshot<T> snapshot_params(ParamStore<T>& params) {
  ParamSnapshot<T> snap;
  for (const auto& [name, t] : params.named()) snap[name] = t.data();
  return snap;
}

template <typename T>
void restore_params(ParamStore<T>& params, const ParamSnapshot<T>& snap) {
  for (auto& [name, t] : params.named()) {
    auto it = snap.find(name);
    if (it == snap.end() || it->second.size() != t.data().size())
      shape_error("parameter snapshot does not match architecture: " + name);
    t.data() = it->second;
  }
}

template <typename T>
struct TrainResult {
  std::vector<EpochLog> epochs;
  ParamSnapshot<T> final_params;
  ParamSnapshot<T> best_params;  // lowest epoch mean loss
  double best_loss = 0.0;
  bool aborted = false;          // non-finite loss; params hold the last good state
  std::string abort_reason;
};

// Seeded training loop shared by all four models. Batches are gradient
// accumulations over batch_size images; each image gets a fresh mask from the
// pool every epoch. Logs one JSON line per epoch when log_stream is given.
template <typename T>
TrainResult<T> train_model(AnyModel<T>& model, const TrainConfig& cfg,
                           const TrainDataset<T>& data,
                           const std::vector<ScanlineMask>& mask_pool,
                           std::ostream* log_stream = nullptr) {
  cfg.validate();
  if (data.size() == 0) shape_error("train_model: empty dataset");
  if (mask_pool.empty()) shape_error("train_model: empty mask pool");

  auto params = model.params().tensors();
  AdamState<T> opt;
  const LrSchedule sched = cfg.schedule();

  TrainResult<T> result;
  result.best_loss = std::numeric_limits<double>::infinity();
  result.best_params = snapshot_params(model.params());

  std::vector<Tensor<T>> mask_tensors;
  for (const auto& m : mask_pool)
    mask_tensors.push_back(m.template context_tensor<T>());

  for (int epoch = 0; epoch < cfg.epochs && !result.aborted; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = sched.lr(epoch);

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(cfg.seed * 0x2545f4914f6cdd1dull + epoch);
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.below(i + 1)]);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size() && !result.aborted;
         start += cfg.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + cfg.batch_size);
      const T inv = T(1) / static_cast<T>(end - start);
      model.params().zero_grads();
      for (std::size_t bi = start; bi < end && !result.aborted; ++bi) {
        const std::size_t i = order[bi];
        const std::size_t mi =
            draw_mask_index(mask_pool.size(), epoch, data.ids[i]);
        const auto& mask = mask_tensors[mi];
        auto corrupted = mul(data.images[i], mask);
        auto pred = model.forward(corrupted, mask, cfg.latent_samples_train,
                                  cfg.seed ^ (epoch * 0x9e3779b97f4a7c15ull +
                                              id_hash(data.ids[i])));
        auto loss = model.loss(pred, data.images[i], mask);
        const double lv = loss.item();
        if (!std::isfinite(lv)) {
          result.aborted = true;
          result.abort_reason = "non-finite loss at epoch " +
                                std::to_string(epoch) + ", image " +
                                data.ids[i];
          break;
        }
        epoch_loss += lv;
        ++seen;
        backward(loss * inv, /*accumulate=*/true);
      }
      if (result.aborted) break;
      const auto step = adam_step(params, opt, static_cast<T>(lr));
      if (!step.applied) {
        result.aborted = true;
        result.abort_reason = "non-finite gradient in parameter " +
                              std::to_string(step.bad_param) + " at epoch " +
                              std::to_string(epoch);
        break;
      }
    }
    if (result.aborted) break;

    const auto t1 = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = epoch_loss / static_cast<double>(seen);
    log.lr = lr;
    log.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    result.epochs.push_back(log);
    if (log_stream) {
      nlohmann::json j{{"epoch", log.epoch},
                       {"mean_loss", log.mean_loss},
                       {"lr", log.lr},
                       {"wall_ms", log.wall_ms}};
      (*log_stream) << j.dump() << "\n";
    }
    if (log.mean_loss < result.best_loss) {
      result.best_loss = log.mean_loss;
      result.best_params = snapshot_params(model.params());
    }
  }

  result.final_params = snapshot_params(model.params());
  if (result.aborted && result.epochs.empty())
    result.best_params = result.final_params;
  return result;
}

// deterministic evaluation mask pairing: fixed per (image id, seed)
inline std::size_t eval_mask_index(std::size_t pool_size, std::uint64_t seed,
                                   const std::string& image_id) {
  Rng rng(seed ^ (id_hash(image_id) * 0x2545f4914f6cdd1dull));
  return static_cast<std::size_t>(rng.below(pool_size));
}

// An inpainting method under evaluation: maps (corrupted, context mask) to a
// composited prediction. Wraps trained models and classical baselines alike.
template <typename T>
using InpaintFn =
    std::function<Tensor<T>(const Tensor<T>& corrupted, const Tensor<T>& mask)>;

template <typename T>
InpaintFn<T> model_inpaint_fn(const AnyModel<T>& model, int latent_samples,
                              std::uint64_t sample_seed) {
  return [&model, latent_samples, sample_seed](const Tensor<T>& corrupted,
                                               const Tensor<T>& mask) {
    return model.forward(corrupted, mask, latent_samples, sample_seed)
        .composited;
  };
}

template <typename T>
InpaintFn<T> ns_inpaint_fn(const NsConfig& cfg = {}) {
  return [cfg](const Tensor<T>& corrupted, const Tensor<T>& mask) {
    RasterImage img = RasterImage::from_tensor(corrupted);
    ScanlineMask m = ScanlineMask::empty(img.h, img.w);
    for (std::int64_t i = 0; i < img.h * img.w; ++i)
      m.bits[i] = mask.data()[i] == T(0) ? 1 : 0;
    return navier_stokes_inpaint(img, m, cfg).template to_tensor<T>();
  };
}

// scores one method on every image: fixed seeded mask, inpaint, MS-SSIM of
// the composited result against the clean image
template <typename T>
ScoreTable evaluate_method(const std::string& model_name,
                           const InpaintFn<T>& method,
                           const TrainDataset<T>& data,
                           const std::vector<ScanlineMask>& mask_pool,
                           std::uint64_t seed, const MsSsimParams& mp = {}) {
  if (mask_pool.empty()) shape_error("evaluate_method: empty mask pool");
  ScoreTable table;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto mi = eval_mask_index(mask_pool.size(), seed, data.ids[i]);
    auto mask = mask_pool[mi].template context_tensor<T>();
    auto corrupted = mul(data.images[i], mask);
    auto result = method(corrupted, mask);
    ScoreRow row;
    row.model = model_name;
    row.region = data.region_of(i);
    row.fold = data.fold_of(i);
    row.image_id = data.ids[i];
    row.metric = "ms_ssim";
    row.value = ms_ssim(result, data.images[i], mp);
    row.seed = seed;
    if (!std::isfinite(row.value))
      shape_error("evaluate_method: non-finite score for " + data.ids[i]);
    table.push_back(std::move(row));
  }
  return table;
}

template <typename T>
ScoreTable evaluate_model(AnyModel<T>& model, const TrainConfig& cfg,
                          const TrainDataset<T>& data,
                          const std::vector<ScanlineMask>& mask_pool,
                          std::uint64_t seed) {
  return evaluate_method<T>(model_kind_name(model.kind()),
                            model_inpaint_fn(model, cfg.latent_samples_eval,
                                             seed),
                            data, mask_pool, seed);
}

template <typename T>
struct CvResult {
  std::vector<ParamSnapshot<T>> fold_params;  // best-loss checkpoint per fold
  std::vector<TrainResult<T>> fold_training;
  ScoreTable table;                           // test-fold scores, merged
};

// 5-fold cross validation: train on 80%, score the held-out 20%, per-fold
// seed = cfg.seed + fold so folds differ but replays are identical
template <typename T>
CvResult<T> cross_validate(const TrainConfig& cfg, const TrainDataset<T>& data,
                           const std::vector<ScanlineMask>& mask_pool,
                           int k = 5, std::ostream* log_stream = nullptr) {
  if (data.folds.size() != data.size())
    shape_error("cross_validate: dataset needs fold assignments");
  CvResult<T> cv;
  for (int fold = 0; fold < k; ++fold) {
    TrainDataset<T> train_split, test_split;
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto& dst = data.folds[i] == fold ? test_split : train_split;
      dst.ids.push_back(data.ids[i]);
      dst.images.push_back(data.images[i]);
      dst.regions.push_back(data.region_of(i));
      dst.folds.push_back(data.folds[i]);
    }
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = cfg.seed + static_cast<std::uint64_t>(fold);
    AnyModel<T> model(cfg.model, cfg.arch, fold_cfg.seed);
    auto tr = train_model(model, fold_cfg, train_split, mask_pool, log_stream);
    restore_params(model.params(), tr.best_params);
    auto scores = evaluate_model(model, cfg, test_split, mask_pool, cfg.seed);
    cv.table.insert(cv.table.end(), scores.begin(), scores.end());
    cv.fold_params.push_back(tr.best_params);
    cv.fold_training.push_back(std::move(tr));
  }
  return cv;
}

// zero-shot scoring of out-of-distribution data with every fold's checkpoint
template <typename T>
ScoreTable evaluate_ood(const TrainConfig& cfg, const CvResult<T>& cv,
                        const TrainDataset<T>& ood_data,
                        const std::vector<ScanlineMask>& mask_pool) {
  ScoreTable table;
  for (std::size_t fold = 0; fold < cv.fold_params.size(); ++fold) {
    AnyModel<T> model(cfg.model, cfg.arch,
                      cfg.seed + static_cast<std::uint64_t>(fold));
    restore_params(model.params(), cv.fold_params[fold]);
    auto scores = evaluate_model(model, cfg, ood_data, mask_pool, cfg.seed);
    for (auto& r : scores) r.fold = static_cast<int>(fold);
    table.insert(table.end(), scores.begin(), scores.end());
  }
  return table;
}

}  // namespace scanfill

#endif  // SCANFILL_TRAINING_HPP
