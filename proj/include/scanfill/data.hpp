#ifndef SCANFILL_DATA_HPP
#define SCANFILL_DATA_HPP

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "scanfill/image.hpp"
#include "scanfill/png_io.hpp"
#include "scanfill/rng.hpp"

namespace scanfill {

inline constexpr std::int64_t kMaskMinMissing = 100;
inline constexpr double kMaskMaxFraction = 0.20;
inline constexpr double kCloudWhiteThreshold = 0.95;  // per-channel "white"
inline constexpr double kCloudMaxWhiteFraction = 0.90;

enum class Era { kPre2003, kPost2003 };

inline const char* era_name(Era e) {
  return e == Era::kPre2003 ? "pre2003" : "post2003";
}
inline Era era_from_name(const std::string& s) {
  if (s == "pre2003") return Era::kPre2003;
  if (s == "post2003") return Era::kPost2003;
  shape_error("unknown era '" + s + "'");
}

// region is a free-form tag; the five study regions get canonical lowercase
// names, anything else is carried through as-is
inline const std::vector<std::string>& known_regions() {
  static const std::vector<std::string> r{"kenya", "uk", "norway", "brazil",
                                          "nepal"};
  return r;
}

struct ImageRecord {
  std::string id;
  std::string path;
  std::string region;
  Era era = Era::kPre2003;
  std::string sha256;
  int fold = -1;
  RasterImage pixels;
  std::optional<std::vector<std::uint8_t>> alpha;  // 0 = missing pixel
  std::optional<double> grid_spacing_deg;          // metadata only
};

struct IngestWarning {
  std::string path;
  std::string reason;
};

struct DatasetManifest {
  std::vector<ImageRecord> records;
  std::vector<IngestWarning> warnings;
};

inline std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(is.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

// Decode every PNG in `dir` (sorted by filename for determinism), normalize
// to [0,1], keep RGBA alpha for mask extraction. Undecodable files are
// skipped with a warning; zero usable files is an error.
inline DatasetManifest ingest_directory(const std::string& dir,
                                        const std::string& region, Era era) {
  namespace fs = std::filesystem;
  DatasetManifest manifest;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    try {
      const PngImage png = read_png(path);
      if (png.channels != 3 && png.channels != 4)
        throw std::runtime_error("unsupported channel count " +
                                 std::to_string(png.channels));
      ImageRecord rec;
      rec.id = fs::path(path).stem().string();
      rec.path = path;
      rec.region = region;
      rec.era = era;
      rec.sha256 = sha256_file(path);
      rec.pixels = RasterImage::filled(png.h, png.w);
      for (std::int64_t i = 0; i < png.h * png.w; ++i)
        for (int c = 0; c < 3; ++c)
          rec.pixels.data[i * 3 + c] =
              static_cast<float>(png.pixels[i * png.channels + c]) / 255.f;
      if (png.channels == 4) {
        std::vector<std::uint8_t> alpha(png.h * png.w);
        for (std::int64_t i = 0; i < png.h * png.w; ++i)
          alpha[i] = png.pixels[i * 4 + 3];
        rec.alpha = std::move(alpha);
      }
      manifest.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      manifest.warnings.push_back({path, e.what()});
    }
  }
  if (manifest.records.empty())
    throw std::runtime_error("ingest_directory: no usable files in " + dir);
  return manifest;
}

// A pixel is missing when alpha == 0, or (without alpha) all three channels
// are exactly zero.
inline ScanlineMask mask_from_record(const ImageRecord& rec) {
  ScanlineMask m = ScanlineMask::empty(rec.pixels.h, rec.pixels.w);
  for (std::int64_t i = 0; i < m.h * m.w; ++i) {
    if (rec.alpha) {
      m.bits[i] = (*rec.alpha)[i] == 0 ? 1 : 0;
    } else {
      m.bits[i] = (rec.pixels.data[i * 3] == 0.f &&
                   rec.pixels.data[i * 3 + 1] == 0.f &&
                   rec.pixels.data[i * 3 + 2] == 0.f)
                      ? 1
                      : 0;
    }
  }
  return m;
}

inline bool mask_acceptable(const ScanlineMask& m) {
  return m.missing_count() >= kMaskMinMissing &&
         m.missing_fraction() < kMaskMaxFraction;
}

struct MaskExtraction {
  std::vector<ScanlineMask> masks;
  bool shortfall = false;  // fewer acceptable masks than requested
};

inline MaskExtraction extract_scanline_masks(
    const std::vector<ImageRecord>& records, std::size_t target_count = 100) {
  std::vector<const ImageRecord*> sorted;
  for (const auto& r : records)
    if (r.era == Era::kPost2003) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const ImageRecord* a, const ImageRecord* b) {
              return a->id < b->id;
            });
  MaskExtraction out;
  for (const auto* rec : sorted) {
    if (out.masks.size() >= target_count) break;
    auto m = mask_from_record(*rec);
    if (mask_acceptable(m)) out.masks.push_back(std::move(m));
  }
  out.shortfall = out.masks.size() < target_count;
  return out;
}

inline RasterImage crop_center(const RasterImage& img, std::int64_t size) {
  if (size > img.h || size > img.w)
    shape_error("crop_center: size " + std::to_string(size) +
                " exceeds image " + std::to_string(img.h) + "x" +
                std::to_string(img.w));
  const std::int64_t oy = (img.h - size) / 2;
  const std::int64_t ox = (img.w - size) / 2;
  RasterImage out = RasterImage::filled(size, size);
  for (std::int64_t y = 0; y < size; ++y)
    for (std::int64_t x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = img.at(oy + y, ox + x, c);
  return out;
}

// keep iff the central 64x64 window has strictly less than 90% white pixels
inline bool cloud_filter(const RasterImage& img) {
  const std::int64_t win = std::min<std::int64_t>({64, img.h, img.w});
  const std::int64_t oy = (img.h - win) / 2, ox = (img.w - win) / 2;
  std::int64_t white = 0;
  for (std::int64_t y = 0; y < win; ++y)
    for (std::int64_t x = 0; x < win; ++x) {
      bool is_white = true;
      for (int c = 0; c < 3; ++c)
        is_white &= img.at(oy + y, ox + x, c) >=
                    static_cast<float>(kCloudWhiteThreshold);
      white += is_white ? 1 : 0;
    }
  const double frac = static_cast<double>(white) / static_cast<double>(win * win);
  return frac < kCloudMaxWhiteFraction;
}

inline InpaintTask apply_scanline(const RasterImage& image,
                                  const ScanlineMask& mask) {
  return InpaintTask(image, mask);
}

// seeded shuffle then contiguous fold slices; deterministic given seed
inline std::vector<int> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || n < static_cast<std::size_t>(k))
    shape_error("kfold_split: need at least k records");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i)
    fold[order[i]] = static_cast<int>(i * static_cast<std::size_t>(k) / n);
  return fold;
}

inline void assign_folds(DatasetManifest& manifest, int k, std::uint64_t seed) {
  auto folds = kfold_split(manifest.records.size(), k, seed);
  for (std::size_t i = 0; i < folds.size(); ++i)
    manifest.records[i].fold = folds[i];
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : m.records) {
    nlohmann::json j{{"id", r.id},       {"path", r.path},
                     {"region", r.region}, {"era", era_name(r.era)},
                     {"sha256", r.sha256}, {"fold", r.fold}};
    if (r.grid_spacing_deg) j["grid_spacing_deg"] = *r.grid_spacing_deg;
    recs.push_back(std::move(j));
  }
  return nlohmann::json{{"records", recs}};
}

inline void save_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << manifest_to_json(m).dump(2) << "\n";
}

// Loads manifest metadata and re-reads the referenced image files.
inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  is >> j;
  DatasetManifest m;
  for (const auto& rj : j.at("records")) {
    ImageRecord rec;
    rec.id = rj.at("id").get<std::string>();
    rec.path = rj.at("path").get<std::string>();
    rec.region = rj.at("region").get<std::string>();
    rec.era = era_from_name(rj.at("era").get<std::string>());
    rec.sha256 = rj.at("sha256").get<std::string>();
    rec.fold = rj.at("fold").get<int>();
    if (rj.contains("grid_spacing_deg"))
      rec.grid_spacing_deg = rj.at("grid_spacing_deg").get<double>();
    const PngImage png = read_png(rec.path);
    rec.pixels = RasterImage::filled(png.h, png.w);
    for (std::int64_t i = 0; i < png.h * png.w; ++i)
      for (int c = 0; c < 3; ++c)
        rec.pixels.data[i * 3 + c] =
            static_cast<float>(png.pixels[i * png.channels + c]) / 255.f;
    if (png.channels == 4) {
      std::vector<std::uint8_t> alpha(png.h * png.w);
      for (std::int64_t i = 0; i < png.h * png.w; ++i)
        alpha[i] = png.pixels[i * 4 + 3];
      rec.alpha = std::move(alpha);
    }
    m.records.push_back(std::move(rec));
  }
  return m;
}

// FNV-1a over the id, used to pair images with masks reproducibly
inline std::uint64_t id_hash(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// per-image mask draw for an epoch, seeded by (epoch, image id hash)
inline std::size_t draw_mask_index(std::size_t pool_size, std::uint64_t epoch,
                                   const std::string& image_id) {
  Rng rng(epoch * 0x9e3779b97f4a7c15ull ^ id_hash(image_id));
  return static_cast<std::size_t>(rng.below(pool_size));
}

}  // namespace scanfill

#endif  // SCANFILL_DATA_HPP
