// scanfill: scanline inpainting pipeline driver.
// Every command reads a strict JSON config, writes its artifacts under a
// fresh run directory (<command>-<seed>-<timestamp>) containing a snapshot of
// the resolved config, and exits 0 on success, 1 on validation errors, 2 on
// runtime failures.
#include <CLI11.hpp>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include "scanfill/checkpoint.hpp"
#include "scanfill/config.hpp"
#include "scanfill/downstream.hpp"
#include "scanfill/inference.hpp"
#include "scanfill/training.hpp"

namespace fs = std::filesystem;
using namespace scanfill;

using Real = float;

namespace {

struct CliOverrides {
  std::string config_path;
  std::string out_dir;         // parent of the run directory
  std::int64_t seed = -1;      // -1 = use config
  std::string model;           // empty = use config
  int size = 0;                // 0 = use config
};

int max_workers() {
  // Parallel fan-out is capped by SCANFILL_THREADS; the compute kernels here
  // are sequential, so this only bounds future fan-out, never changes results.
  const char* env = std::getenv("SCANFILL_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  if (n < 1) throw std::runtime_error("SCANFILL_THREADS must be a positive integer");
  return n;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%S", std::gmtime(&t));
  return buf;
}

fs::path make_run_dir(const std::string& command, std::uint64_t seed,
                      const std::string& out_parent,
                      const nlohmann::json& resolved_config) {
  fs::path parent = out_parent.empty() ? fs::path(".") : fs::path(out_parent);
  fs::path dir = parent / (command + "-" + std::to_string(seed) + "-" + timestamp());
  // suffix on collision so rapid repeated runs never clobber each other
  fs::path candidate = dir;
  for (int i = 1; fs::exists(candidate); ++i)
    candidate = dir.string() + "-" + std::to_string(i);
  fs::create_directories(candidate);
  std::ofstream snap(candidate / "config.json");
  snap << resolved_config.dump(2) << "\n";
  return candidate;
}

// ------------------------------------------------------------- config parsing

nlohmann::json resolve_config(const CliOverrides& cli) {
  auto j = load_json_file(cli.config_path);
  if (cli.seed >= 0) j["seed"] = cli.seed;
  if (!cli.model.empty()) j["model"] = cli.model;
  if (cli.size > 0) j["image_size"] = cli.size;
  return j;
}

ModelHyperparams parse_arch(const nlohmann::json& root) {
  ModelHyperparams hp;
  if (!root.contains("arch")) return hp;
  const auto& a = root.at("arch");
  require_known_keys(a, "arch", {"convcnp", "convlnp", "unet", "partialconv"});
  if (a.contains("convcnp")) {
    const auto& c = a.at("convcnp");
    require_known_keys(c, "arch.convcnp",
                       {"kernel", "channels", "layers", "decoder_layers",
                        "decoder_hidden"});
    hp.cnp.setconv_kernel = config_get(c, "kernel", hp.cnp.setconv_kernel);
    hp.cnp.trunk_channels = config_get(c, "channels", hp.cnp.trunk_channels);
    hp.cnp.trunk_layers = config_get(c, "layers", hp.cnp.trunk_layers);
    hp.cnp.decoder_layers = config_get(c, "decoder_layers", hp.cnp.decoder_layers);
    hp.cnp.decoder_hidden = config_get(c, "decoder_hidden", hp.cnp.decoder_hidden);
  }
  if (a.contains("convlnp")) {
    const auto& c = a.at("convlnp");
    require_known_keys(c, "arch.convlnp",
                       {"kernel", "channels", "layers", "latent_channels",
                        "decoder_layers", "decoder_hidden", "logvar_clamp"});
    hp.lnp.setconv_kernel = config_get(c, "kernel", hp.lnp.setconv_kernel);
    hp.lnp.trunk_channels = config_get(c, "channels", hp.lnp.trunk_channels);
    hp.lnp.trunk_layers = config_get(c, "layers", hp.lnp.trunk_layers);
    hp.lnp.latent_channels = config_get(c, "latent_channels", hp.lnp.latent_channels);
    hp.lnp.decoder_layers = config_get(c, "decoder_layers", hp.lnp.decoder_layers);
    hp.lnp.decoder_hidden = config_get(c, "decoder_hidden", hp.lnp.decoder_hidden);
    hp.lnp.logvar_clamp = config_get(c, "logvar_clamp", hp.lnp.logvar_clamp);
  }
  if (a.contains("unet")) {
    const auto& c = a.at("unet");
    require_known_keys(c, "arch.unet", {"levels", "channels", "skips"});
    hp.unet.levels = config_get(c, "levels", hp.unet.levels);
    hp.unet.base_channels = config_get(c, "channels", hp.unet.base_channels);
    hp.unet.skip_connections = config_get(c, "skips", hp.unet.skip_connections);
  }
  if (a.contains("partialconv")) {
    const auto& c = a.at("partialconv");
    require_known_keys(c, "arch.partialconv", {"levels", "channels"});
    hp.pconv.levels = config_get(c, "levels", hp.pconv.levels);
    hp.pconv.base_channels = config_get(c, "channels", hp.pconv.base_channels);
  }
  return hp;
}

// Dataset sources: a prepared manifest, a raw image directory, or the
// procedural corpus used for smoke-scale runs.
TrainDataset<Real> parse_dataset(const nlohmann::json& root,
                                 std::uint64_t seed) {
  if (!root.contains("data"))
    throw std::runtime_error("missing required config section 'data'");
  const auto& d = root.at("data");
  require_known_keys(d, "data",
                     {"manifest", "input_dir", "region", "era", "synthetic",
                      "folds"});
  TrainDataset<Real> out;
  if (d.contains("synthetic")) {
    const auto& s = d.at("synthetic");
    require_known_keys(s, "data.synthetic", {"count", "size", "seed"});
    const auto count = config_require<std::size_t>(s, "count", "data.synthetic");
    const auto size = config_require<std::int64_t>(s, "size", "data.synthetic");
    const auto corpus_seed = config_get<std::uint64_t>(s, "seed", seed);
    out = dataset_from_corpus<Real>(make_corpus(count, 0, size, corpus_seed));
  } else if (d.contains("manifest")) {
    out = dataset_from_manifest<Real>(
        load_manifest(d.at("manifest").get<std::string>()));
  } else if (d.contains("input_dir")) {
    auto manifest = ingest_directory(
        d.at("input_dir").get<std::string>(),
        config_get<std::string>(d, "region", "other"),
        era_from_name(config_get<std::string>(d, "era", "pre2003")));
    out = dataset_from_manifest<Real>(manifest);
  } else {
    throw std::runtime_error(
        "data section needs one of: manifest, input_dir, synthetic");
  }
  if (out.folds.empty() || d.contains("folds")) {
    const int k = config_get(d, "folds", 5);
    if (out.size() >= static_cast<std::size_t>(k)) {
      out.folds = kfold_split(out.size(), k, seed);
    }
  }
  return out;
}

std::vector<ScanlineMask> parse_mask_pool(const nlohmann::json& root,
                                          std::uint64_t seed) {
  if (!root.contains("masks"))
    throw std::runtime_error("missing required config section 'masks'");
  const auto& m = root.at("masks");
  require_known_keys(m, "masks", {"dir", "synthetic", "input_dir", "count"});
  std::vector<ScanlineMask> pool;
  if (m.contains("synthetic")) {
    const auto& s = m.at("synthetic");
    require_known_keys(s, "masks.synthetic", {"count", "size", "seed"});
    const auto count = config_require<std::size_t>(s, "count", "masks.synthetic");
    const auto size = config_require<std::int64_t>(s, "size", "masks.synthetic");
    const auto mask_seed = config_get<std::uint64_t>(s, "seed", seed);
    for (std::size_t i = 0; i < count; ++i)
      pool.push_back(make_scanline_mask(mask_seed * 1315423911ull + i, size, size));
  } else if (m.contains("dir")) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(m.at("dir").get<std::string>()))
      if (e.is_regular_file() && e.path().extension() == ".png")
        files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) pool.push_back(read_png_mask(f));
  } else {
    throw std::runtime_error("masks section needs one of: dir, synthetic");
  }
  if (pool.empty()) throw std::runtime_error("mask pool is empty");
  return pool;
}

TrainConfig parse_train_config(const nlohmann::json& root) {
  const auto model = model_kind_from_name(
      config_get<std::string>(root, "model", "convcnp"));
  const int size = config_get(root, "image_size", 128);
  TrainConfig cfg = TrainConfig::defaults_for(model, size);
  cfg.seed = config_get<std::uint64_t>(root, "seed", 0);
  cfg.arch = parse_arch(root);
  if (root.contains("train")) {
    const auto& t = root.at("train");
    require_known_keys(t, "train",
                       {"epochs", "batch_size", "base_lr", "lr_decay",
                        "decay_factor", "latent_samples_train",
                        "latent_samples_eval"});
    cfg.epochs = config_get(t, "epochs", cfg.epochs);
    cfg.batch_size = config_get(t, "batch_size", cfg.batch_size);
    cfg.base_lr = config_get(t, "base_lr", cfg.base_lr);
    cfg.lr_decay = config_get(t, "lr_decay", cfg.lr_decay);
    cfg.decay_factor = config_get(t, "decay_factor", cfg.decay_factor);
    cfg.latent_samples_train =
        config_get(t, "latent_samples_train", cfg.latent_samples_train);
    cfg.latent_samples_eval =
        config_get(t, "latent_samples_eval", cfg.latent_samples_eval);
  }
  cfg.validate();
  return cfg;
}

void validate_top_level(const nlohmann::json& root) {
  require_known_keys(root, "config",
                     {"seed", "model", "image_size", "data", "masks", "train",
                      "arch", "eval", "inpaint", "downstream", "report"});
}

AnyModel<Real> load_model_checkpoint(const std::string& path,
                                     const ModelHyperparams& arch) {
  const auto header = peek_checkpoint(path);
  AnyModel<Real> model(header.kind, arch, 0);
  load_checkpoint<Real>(path, header.kind, model.fingerprint(), model.params());
  return model;
}

// named methods accepted by eval/inpaint/downstream configs
InpaintFn<Real> method_by_name(const std::string& name,
                               std::shared_ptr<AnyModel<Real>>& holder,
                               const ModelHyperparams& arch,
                               const std::string& checkpoint, int latent_samples,
                               std::uint64_t seed) {
  if (name == "identity" || name == "zerofill")
    return [](const Tensor<Real>& corrupted, const Tensor<Real>&) {
      return corrupted;
    };
  if (name == "ns") return ns_inpaint_fn<Real>();
  if (name == "checkpoint") {
    if (checkpoint.empty())
      throw std::runtime_error("method 'checkpoint' needs a checkpoint path");
    holder = std::make_shared<AnyModel<Real>>(load_model_checkpoint(checkpoint, arch));
    return model_inpaint_fn(*holder, latent_samples, seed);
  }
  throw std::runtime_error("unknown method '" + name +
                           "' (expected checkpoint, identity, zerofill or ns)");
}

// ------------------------------------------------------------------ commands

int cmd_masks_extract(const nlohmann::json& root, const CliOverrides& cli) {
  validate_top_level(root);
  const auto seed = config_get<std::uint64_t>(root, "seed", 0);
  if (!root.contains("masks"))
    throw std::runtime_error("missing required config section 'masks'");
  const auto& m = root.at("masks");
  require_known_keys(m, "masks", {"input_dir", "count", "region"});
  const auto input_dir = config_require<std::string>(m, "input_dir", "masks");
  const auto count = config_get<std::size_t>(m, "count", 100);

  auto manifest = ingest_directory(
      input_dir, config_get<std::string>(m, "region", "kenya"), Era::kPost2003);
  for (const auto& w : manifest.warnings)
    std::cerr << "warning: skipped " << w.path << ": " << w.reason << "\n";
  auto extraction = extract_scanline_masks(manifest.records, count);

  const auto run_dir = make_run_dir("masks-extract", seed, cli.out_dir, root);
  fs::create_directories(run_dir / "masks");
  for (std::size_t i = 0; i < extraction.masks.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "mask_%04zu.png", i);
    write_png_mask((run_dir / "masks" / name).string(), extraction.masks[i]);
  }
  nlohmann::json summary{{"count", extraction.masks.size()},
                         {"requested", count},
                         {"shortfall", extraction.shortfall}};
  std::ofstream(run_dir / "masks.json") << summary.dump(2) << "\n";
  if (extraction.shortfall)
    std::cerr << "warning: only " << extraction.masks.size() << " of " << count
              << " requested masks passed the filters\n";
  std::cout << run_dir.string() << "\n";
  return 0;
}

int cmd_data_prepare(const nlohmann::json& root, const CliOverrides& cli) {
  validate_top_level(root);
  const auto seed = config_get<std::uint64_t>(root, "seed", 0);
  if (!root.contains("data"))
    throw std::runtime_error("missing required config section 'data'");
  const auto& d = root.at("data");
  require_known_keys(d, "data",
                     {"input_dir", "region", "era", "crop", "cloud_filter",
                      "folds"});
  const auto input_dir = config_require<std::string>(d, "input_dir", "data");
  const auto region = config_get<std::string>(d, "region", "other");
  const auto era = era_from_name(config_get<std::string>(d, "era", "pre2003"));
  const auto crop = config_get<std::int64_t>(d, "crop", 0);
  const bool clouds = config_get(d, "cloud_filter", true);
  const int k = config_get(d, "folds", 5);

  auto manifest = ingest_directory(input_dir, region, era);
  for (const auto& w : manifest.warnings)
    std::cerr << "warning: skipped " << w.path << ": " << w.reason << "\n";

  const auto run_dir = make_run_dir("data-prepare", seed, cli.out_dir, root);
  fs::create_directories(run_dir / "images");
  DatasetManifest kept;
  for (auto& rec : manifest.records) {
    RasterImage img = rec.pixels;
    if (crop > 0) img = crop_center(img, crop);
    if (clouds && !cloud_filter(img)) continue;
    const auto out_path = (run_dir / "images" / (rec.id + ".png")).string();
    write_png_rgb(out_path, img);
    rec.pixels = std::move(img);
    rec.path = out_path;
    rec.sha256 = sha256_file(out_path);
    kept.records.push_back(std::move(rec));
  }
  if (kept.records.empty())
    throw std::runtime_error("no images survived the filters");
  if (kept.records.size() >= static_cast<std::size_t>(k))
    assign_folds(kept, k, seed);
  save_manifest((run_dir / "manifest.json").string(), kept);
  std::cout << run_dir.string() << "\n";
  return 0;
}

int cmd_train(const nlohmann::json& root, const CliOverrides& cli) {
  validate_top_level(root);
  auto cfg = parse_train_config(root);
  auto data = parse_dataset(root, cfg.seed);
  auto pool = parse_mask_pool(root, cfg.seed);

  const auto run_dir = make_run_dir("train", cfg.seed, cli.out_dir, root);
  std::ofstream log(run_dir / "train_log.jsonl");
  AnyModel<Real> model(cfg.model, cfg.arch, cfg.seed);
  auto result = train_model(model, cfg, data, pool, &log);

  auto save = [&](const std::string& name, const ParamSnapshot<Real>& snap) {
    restore_params(model.params(), snap);
    save_checkpoint((run_dir / name).string(), model.kind(),
                    model.fingerprint(), model.params());
  };
  save("final.sfck", result.final_params);
  save("best.sfck", result.best_params);
  if (result.aborted) {
    std::cerr << "error: training aborted: " << result.abort_reason
              << " (checkpoints hold the last good state)\n";
    std::cout << run_dir.string() << "\n";
    return 2;
  }
  std::cout << run_dir.string() << "\n";
  return 0;
}

int cmd_eval(const nlohmann::json& root, const CliOverrides& cli) {
  validate_top_level(root);
  const auto seed = config_get<std::uint64_t>(root, "seed", 0);
  const auto arch = parse_arch(root);
  auto data = parse_dataset(root, seed);
  auto pool = parse_mask_pool(root, seed);

  std::string method_name = "checkpoint", checkpoint;
  int latent_samples = 8;
  if (root.contains("eval")) {
    const auto& e = root.at("eval");
    require_known_keys(e, "eval", {"method", "checkpoint", "latent_samples"});
    method_name = config_get<std::string>(e, "method", method_name);
    checkpoint = config_get<std::string>(e, "checkpoint", checkpoint);
    latent_samples = config_get(e, "latent_samples", latent_samples);
  }
  std::shared_ptr<AnyModel<Real>> holder;
  auto method =
      method_by_name(method_name, holder, arch, checkpoint, latent_samples, seed);
  // the identity oracle scores the clean image itself
  ScoreTable table;
  if (method_name == "identity") {
    for (std::size_t i = 0; i < data.size(); ++i) {
      TrainDataset<Real> one;
      one.ids = {data.ids[i]};
      one.images = {data.images[i]};
      one.regions = {data.region_of(i)};
      one.folds = {data.fold_of(i)};
      InpaintFn<Real> oracle = [&, i](const Tensor<Real>&, const Tensor<Real>&) {
        return data.images[i];
      };
      auto rows = evaluate_method<Real>("identity", oracle, one, pool, seed);
      table.insert(table.end(), rows.begin(), rows.end());
    }
  } else {
    const std::string label =
        holder ? model_kind_name(holder->kind()) : method_name;
    table = evaluate_method<Real>(label, method, data, pool, seed);
  }

  const auto run_dir = make_run_dir("eval", seed, cli.out_dir, root);
  save_score_csv((run_dir / "scores.csv").string(), table);
  std::cout << run_dir.string() << "\n";
  return 0;
}

int cmd_cv(const nlohmann::json& root, const CliOverrides& cli) {
  validate_top_level(root);
  auto cfg = parse_train_config(root);
  auto data = parse_dataset(root, cfg.seed);
  auto pool = parse_mask_pool(root, cfg.seed);
  if (data.folds.size() != data.size())
    throw std::runtime_error("cv needs at least as many images as folds");

  const auto run_dir = make_run_dir("cv", cfg.seed, cli.out_dir, root);
  std::ofstream log(run_dir / "train_log.jsonl");
  auto cv = cross_validate(cfg, data, pool, 5, &log);
  for (std::size_t fold = 0; fold < cv.fold_params.size(); ++fold) {
    AnyModel<Real> model(cfg.model, cfg.arch,
                         cfg.seed + static_cast<std::uint64_t>(fold));
    restore_params(model.params(), cv.fold_params[fold]);
    save_checkpoint((run_dir / ("fold" + std::to_string(fold) + ".sfck")).string(),
                    model.kind(), model.fingerprint(), model.params());
  }
  save_score_csv((run_dir / "scores.csv").string(), cv.table);
  std::cout << run_dir.string() << "\n";
  return 0;
}

int cmd_inpaint(const nlohmann::json& root, const CliOverrides& cli,
                bool patched) {
  validate_top_level(root);
  const auto seed = config_get<std::uint64_t>(root, "seed", 0);
  const auto arch = parse_arch(root);
  if (!root.contains("inpaint"))
    throw std::runtime_error("missing required config section 'inpaint'");
  const auto& c = root.at("inpaint");
  require_known_keys(c, "inpaint",
                     {"method", "checkpoint", "image", "mask", "out",
                      "latent_samples", "patch", "overlap", "expected_size"});
  const auto image_path = config_require<std::string>(c, "image", "inpaint");
  const auto mask_path = config_require<std::string>(c, "mask", "inpaint");
  const auto out_name = config_get<std::string>(c, "out", "inpainted.png");
  const auto method_name = config_get<std::string>(c, "method", "checkpoint");
  const auto checkpoint = config_get<std::string>(c, "checkpoint", "");
  const int latent_samples = config_get(c, "latent_samples", 8);

  const PngImage png = read_png(image_path);
  RasterImage image = RasterImage::filled(png.h, png.w);
  for (std::int64_t i = 0; i < png.h * png.w; ++i)
    for (int ch = 0; ch < 3; ++ch)
      image.data[i * 3 + ch] =
          static_cast<float>(png.pixels[i * png.channels + ch]) / 255.f;
  const auto mask = read_png_mask(mask_path);

  std::shared_ptr<AnyModel<Real>> holder;
  auto method =
      method_by_name(method_name, holder, arch, checkpoint, latent_samples, seed);

  RasterImage result;
  if (patched) {
    const auto patch = config_get<std::int64_t>(c, "patch", 64);
    const auto overlap = config_get<std::int64_t>(c, "overlap", 0);
    result = patch_inpaint(method, image, mask, patch, overlap);
  } else {
    result = inpaint(method, image, mask,
                     config_get<std::int64_t>(c, "expected_size", 0));
  }

  const auto run_dir = make_run_dir(patched ? "patch-inpaint" : "inpaint", seed,
                                    cli.out_dir, root);
  write_png_rgb((run_dir / out_name).string(), result);
  std::cout << run_dir.string() << "\n";
  return 0;
}

int cmd_downstream(const nlohmann::json& root, const CliOverrides& cli) {
  validate_top_level(root);
  const auto seed = config_get<std::uint64_t>(root, "seed", 0);
  const auto arch = parse_arch(root);
  auto data = parse_dataset(root, seed);
  auto pool = parse_mask_pool(root, seed);
  if (data.folds.size() != data.size())
    throw std::runtime_error("downstream needs fold assignments (>= 5 images)");

  if (!root.contains("downstream"))
    throw std::runtime_error("missing required config section 'downstream'");
  const auto& d = root.at("downstream");
  require_known_keys(d, "downstream",
                     {"a", "f_seed", "g_seed", "methods", "regressor",
                      "latent_samples"});
  SyntheticTaskSpec spec;
  spec.scale_a = config_get(d, "a", spec.scale_a);
  spec.f_seed = config_get<std::uint64_t>(d, "f_seed", seed * 2 + 1);
  spec.g_seed = config_get<std::uint64_t>(d, "g_seed", seed * 2 + 2);
  spec.image_size = static_cast<int>(data.images[0].dim(2));
  spec.validate();

  RegressorConfig rcfg;
  if (d.contains("regressor")) {
    const auto& r = d.at("regressor");
    require_known_keys(r, "downstream.regressor",
                       {"epochs", "batch_size", "lr", "plateau_factor",
                        "plateau_patience", "early_stop_patience",
                        "early_stop_threshold"});
    rcfg.epochs = config_get(r, "epochs", rcfg.epochs);
    rcfg.batch_size = config_get(r, "batch_size", rcfg.batch_size);
    rcfg.lr = config_get(r, "lr", rcfg.lr);
    rcfg.plateau_factor = config_get(r, "plateau_factor", rcfg.plateau_factor);
    rcfg.plateau_patience = config_get(r, "plateau_patience", rcfg.plateau_patience);
    rcfg.early_stop_patience =
        config_get(r, "early_stop_patience", rcfg.early_stop_patience);
    rcfg.early_stop_threshold =
        config_get(r, "early_stop_threshold", rcfg.early_stop_threshold);
  }
  rcfg.validate();
  const int latent_samples = config_get(d, "latent_samples", 8);
  if (!d.contains("methods") || !d.at("methods").is_array() ||
      d.at("methods").empty())
    throw std::runtime_error(
        "downstream config needs a non-empty 'methods' array");

  // each method produces one input variant: the same fixed eval mask per
  // image, inpainted by that method ("clean" skips corruption entirely)
  std::vector<DownstreamVariant<Real>> variants;
  std::vector<std::shared_ptr<AnyModel<Real>>> holders;
  for (const auto& mj : d.at("methods")) {
    require_known_keys(mj, "downstream.methods[]",
                       {"name", "method", "checkpoint"});
    DownstreamVariant<Real> variant;
    variant.name = config_require<std::string>(mj, "name", "downstream.methods[]");
    const auto method_name =
        config_get<std::string>(mj, "method", variant.name);
    if (method_name == "clean") {
      variant.inputs = data.images;
    } else {
      holders.emplace_back();
      auto method = method_by_name(method_name, holders.back(), arch,
                                   config_get<std::string>(mj, "checkpoint", ""),
                                   latent_samples, seed);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto mi = eval_mask_index(pool.size(), seed, data.ids[i]);
        auto mask = pool[mi].context_tensor<Real>();
        auto corrupted = mul(data.images[i], mask);
        variant.inputs.push_back(method(corrupted, mask).detach());
      }
    }
    variants.push_back(std::move(variant));
  }

  auto table = compare_variants(spec, variants, data.images, data.folds,
                                data.region_of(0), rcfg);

  // sidecar with seeds and any failed folds, re-running the regression to
  // surface failures would be wasteful, so count them from the table
  nlohmann::json sidecar{{"a", spec.scale_a},
                         {"f_seed", spec.f_seed},
                         {"g_seed", spec.g_seed},
                         {"image_size", spec.image_size},
                         {"label_net", "conv3x3-8ch/pool2-conv3x3-16ch/pool2-fc"},
                         {"failed_folds", nlohmann::json::array()}};
  std::map<std::string, std::set<int>> present;
  for (const auto& r : table) present[r.model].insert(r.fold);
  for (const auto& v : variants)
    for (int fold = 0; fold < 5; ++fold)
      if (!present[v.name].count(fold))
        sidecar["failed_folds"].push_back({{"method", v.name}, {"fold", fold}});

  const auto run_dir = make_run_dir("downstream", seed, cli.out_dir, root);
  save_score_csv((run_dir / "scores.csv").string(), table);
  std::ofstream(run_dir / "sidecar.json") << sidecar.dump(2) << "\n";
  std::cout << run_dir.string() << "\n";
  return 0;
}

int cmd_report(const nlohmann::json& root, const CliOverrides& cli) {
  validate_top_level(root);
  const auto seed = config_get<std::uint64_t>(root, "seed", 0);
  if (!root.contains("report"))
    throw std::runtime_error("missing required config section 'report'");
  const auto& r = root.at("report");
  require_known_keys(r, "report", {"input", "out"});
  const auto input = config_require<std::string>(r, "input", "report");
  const auto out_name = config_get<std::string>(r, "out", "aggregate.csv");

  auto table = load_score_csv(input);
  auto agg = aggregate_scores(table);
  const auto run_dir = make_run_dir("report", seed, cli.out_dir, root);
  std::ofstream os(run_dir / out_name);
  write_aggregate_csv(os, agg);
  std::cout << run_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scanline inpainting pipeline"};
  app.require_subcommand(1);

  CliOverrides cli;
  std::string command;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", cli.config_path, "JSON config file")->required();
    sub->add_option("--seed", cli.seed, "override config seed");
    sub->add_option("--model", cli.model, "override model kind");
    sub->add_option("--size", cli.size, "override image size");
    sub->add_option("--out", cli.out_dir, "parent directory for the run dir");
  };

  auto* masks = app.add_subcommand("masks", "mask pool operations");
  masks->require_subcommand(1);
  auto* masks_extract =
      masks->add_subcommand("extract", "harvest scanline masks from imagery");
  add_common(masks_extract);
  masks_extract->callback([&] { command = "masks-extract"; });

  auto* data = app.add_subcommand("data", "dataset operations");
  data->require_subcommand(1);
  auto* data_prepare =
      data->add_subcommand("prepare", "ingest, filter, crop and split");
  add_common(data_prepare);
  data_prepare->callback([&] { command = "data-prepare"; });

  for (auto [name, desc] :
       std::initializer_list<std::pair<const char*, const char*>>{
           {"train", "train an inpainting model"},
           {"eval", "score a method on a dataset"},
           {"cv", "5-fold cross-validated training and scoring"},
           {"inpaint", "apply a method to one image"},
           {"patch-inpaint", "tiled inference for large rasters"},
           {"downstream", "synthetic regression comparison"},
           {"report", "aggregate a score table"}}) {
    auto* sub = app.add_subcommand(name, desc);
    add_common(sub);
    sub->callback([&, name = std::string(name)] { command = name; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    max_workers();  // validate SCANFILL_THREADS up front
    const auto root = resolve_config(cli);
    if (command == "masks-extract") return cmd_masks_extract(root, cli);
    if (command == "data-prepare") return cmd_data_prepare(root, cli);
    if (command == "train") return cmd_train(root, cli);
    if (command == "eval") return cmd_eval(root, cli);
    if (command == "cv") return cmd_cv(root, cli);
    if (command == "inpaint") return cmd_inpaint(root, cli, false);
    if (command == "patch-inpaint") return cmd_inpaint(root, cli, true);
    if (command == "downstream") return cmd_downstream(root, cli);
    if (command == "report") return cmd_report(root, cli);
    std::cerr << "error: no command selected\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    // config/validation problems exit 1, unexpected failures exit 2
    const std::string what = e.what();
    const bool validation = what.find("config") != std::string::npos ||
                            what.find("unknown") != std::string::npos ||
                            what.find("missing required") != std::string::npos;
    std::cerr << "error: " << what << "\n";
    return validation ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
