#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "scanfill/checkpoint.hpp"
#include "scanfill/np_models.hpp"
#include "scanfill/optim.hpp"
#include "scanfill/synth.hpp"

using namespace scanfill;

namespace {

Tensor<double> random_image(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  auto t = Tensor<double>::zeros({1, 3, h, w});
  for (auto& v : t.data()) v = rng.uniform();
  return t;
}

Tensor<double> band_mask(std::int64_t h, std::int64_t w, std::int64_t y0,
                         std::int64_t y1) {
  auto m = Tensor<double>::full({1, 1, h, w}, 1.0);
  for (std::int64_t y = y0; y < y1; ++y)
    for (std::int64_t x = 0; x < w; ++x) m.data()[y * w + x] = 0.0;
  return m;
}

ConvCnpConfig tiny_cnp() {
  ConvCnpConfig cfg;
  cfg.setconv_kernel = 3;
  cfg.trunk_channels = 8;
  cfg.trunk_layers = 2;
  cfg.decoder_layers = 2;
  cfg.decoder_hidden = 8;
  return cfg;
}

ConvLnpConfig tiny_lnp() {
  ConvLnpConfig cfg;
  cfg.setconv_kernel = 3;
  cfg.trunk_channels = 8;
  cfg.trunk_layers = 2;
  cfg.latent_channels = 4;
  cfg.decoder_layers = 2;
  cfg.decoder_hidden = 8;
  return cfg;
}

}  // namespace

TEST_CASE("masked smoothing matches a direct loop oracle") {
  const std::int64_t H = 8, W = 8;
  auto img = random_image(H, W, 11);
  auto mask = band_mask(H, W, 3, 5);
  Rng rng(5);
  auto raw = Tensor<double>::zeros({3, 3});
  for (auto& v : raw.data()) v = rng.uniform(-1.0, 1.0);

  auto rep = set_conv(img, mask, raw);
  REQUIRE(rep.density.shape() == Shape{1, 1, H, W});
  REQUIRE(rep.signal.shape() == Shape{1, 3, H, W});
  CHECK_FALSE(rep.empty_context);

  // oracle: k = |raw| + eps, density = k * mask, signal = (k * (mask*img)) /
  // (density + eps), zero padding at the border
  auto kval = [&](std::int64_t i, std::int64_t j) {
    return std::abs(raw.data()[i * 3 + j]) + kKernelPositivity;
  };
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x) {
      double den = 0;
      double sig[3] = {0, 0, 0};
      for (std::int64_t i = 0; i < 3; ++i)
        for (std::int64_t j = 0; j < 3; ++j) {
          const std::int64_t sy = y + i - 1, sx = x + j - 1;
          if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
          const double m = mask.data()[sy * W + sx];
          den += kval(i, j) * m;
          for (int c = 0; c < 3; ++c)
            sig[c] += kval(i, j) * m * img.data()[(c * H + sy) * W + sx];
        }
      CHECK(rep.density.data()[y * W + x] == doctest::Approx(den).epsilon(1e-9));
      for (int c = 0; c < 3; ++c)
        CHECK(rep.signal.data()[(c * H + y) * W + x] ==
              doctest::Approx(sig[c] / (den + kDensityEpsilon)).epsilon(1e-9));
    }
}

TEST_CASE("single observed pixel reproduces its own value after smoothing") {
  const std::int64_t H = 7, W = 7;
  auto img = Tensor<double>::zeros({1, 3, H, W});
  img.data()[(0 * H + 3) * W + 3] = 0.62;
  img.data()[(1 * H + 3) * W + 3] = 0.25;
  img.data()[(2 * H + 3) * W + 3] = 0.91;
  auto mask = Tensor<double>::zeros({1, 1, H, W});
  mask.data()[3 * W + 3] = 1.0;
  auto raw = Tensor<double>::full({3, 3}, 0.4);
  auto rep = set_conv(img, mask, raw);
  // at the observed pixel the kernel weight cancels in the normalization
  for (int c = 0; c < 3; ++c)
    CHECK(rep.signal.data()[(c * H + 3) * W + 3] ==
          doctest::Approx(img.data()[(c * H + 3) * W + 3]).epsilon(1e-6));
}

TEST_CASE("all-missing context is flagged and still yields finite output") {
  auto img = Tensor<double>::zeros({1, 3, 8, 8});
  auto mask = Tensor<double>::zeros({1, 1, 8, 8});
  auto raw = Tensor<double>::full({3, 3}, 0.2);
  auto rep = set_conv(img, mask, raw);
  CHECK(rep.empty_context);
  CHECK(all_finite(rep.signal));
  ConvCnp<double> model(tiny_cnp(), 1);
  auto pred = model.forward(img, mask);
  CHECK(pred.empty_context);
  CHECK(all_finite(pred.mu));
}

TEST_CASE("conditional model output contracts") {
  const std::int64_t H = 16, W = 16;
  auto img = random_image(H, W, 3);
  auto mask = band_mask(H, W, 6, 9);
  ConvCnp<double> model(tiny_cnp(), 42);
  auto pred = model.forward(img, mask);
  REQUIRE(pred.mu.shape() == Shape{1, 3, H, W});
  REQUIRE(pred.composited.shape() == Shape{1, 3, H, W});
  for (double v : pred.mu.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // context pixels survive compositing bit-exactly
  for (std::int64_t y = 0; y < H; ++y)
    for (std::int64_t x = 0; x < W; ++x)
      if (mask.data()[y * W + x] == 1.0)
        for (int c = 0; c < 3; ++c)
          CHECK(pred.composited.data()[(c * H + y) * W + x] ==
                img.data()[(c * H + y) * W + x]);
}

TEST_CASE("same seed gives identical parameters and predictions") {
  auto img = random_image(16, 16, 9);
  auto mask = band_mask(16, 16, 4, 6);
  ConvCnp<double> a(tiny_cnp(), 7), b(tiny_cnp(), 7), c(tiny_cnp(), 8);
  auto pa = a.forward(img, mask), pb = b.forward(img, mask),
       pc = c.forward(img, mask);
  CHECK(pa.mu.data() == pb.mu.data());
  CHECK(pa.mu.data() != pc.mu.data());
}

TEST_CASE("a few optimizer steps reduce the inpainting loss") {
  const std::int64_t H = 16, W = 16;
  auto clean = make_texture(TextureFamily::kGradient, 4, H).to_tensor<double>();
  auto mask = band_mask(H, W, 7, 9);
  auto corrupted = mul(clean, mask);
  ConvCnp<double> model(tiny_cnp(), 123);
  MsSsimParams mp;
  AdamState<double> opt;
  auto params = model.params().tensors();
  double first = 0, last = 0;
  for (int step = 0; step < 20; ++step) {
    auto pred = model.forward(corrupted, mask);
    auto loss = model.loss(pred, clean, mp);
    if (step == 0) first = loss.item();
    last = loss.item();
    backward(loss);
    adam_step(params, opt, 1e-3);
  }
  CHECK(last < first);
  CHECK(std::isfinite(last));
}

TEST_CASE("latent model sampling contracts") {
  const std::int64_t H = 16, W = 16;
  auto img = random_image(H, W, 21);
  auto mask = band_mask(H, W, 5, 7);
  ConvLnp<double> model(tiny_lnp(), 31);

  auto pred = model.forward(img, mask, 3, 99);
  REQUIRE(pred.samples.size() == 3);
  // every sample is composited, so context pixels are exact in each
  for (const auto& s : pred.samples)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t x = 0; x < W; ++x)
        if (mask.data()[y * W + x] == 1.0)
          for (int c = 0; c < 3; ++c)
            CHECK(s.data()[(c * H + y) * W + x] ==
                  img.data()[(c * H + y) * W + x]);
  // mean prediction equals the arithmetic mean of the samples
  for (std::size_t i = 0; i < pred.mu.data().size(); ++i) {
    double acc = 0;
    for (const auto& s : pred.samples) acc += s.data()[i];
    CHECK(pred.mu.data()[i] == doctest::Approx(acc / 3.0).epsilon(1e-12));
  }
  // same sampling seed replays exactly, a different one does not
  auto again = model.forward(img, mask, 3, 99);
  CHECK(again.mu.data() == pred.mu.data());
  auto other = model.forward(img, mask, 3, 100);
  CHECK(other.mu.data() != pred.mu.data());

  auto single = model.forward(img, mask, 1, 5);
  CHECK(single.samples.size() == 1);
  CHECK(single.mu.data() == single.samples[0].data());
  CHECK_THROWS(model.forward(img, mask, 0, 5));

  auto loss = model.loss(pred, img);
  CHECK(std::isfinite(loss.item()));
}

TEST_CASE("latent field variance stays bounded by the clamp") {
  auto img = random_image(16, 16, 2);
  auto mask = band_mask(16, 16, 0, 2);
  ConvLnp<double> model(tiny_lnp(), 77);
  auto lf = model.encode(img, mask);
  for (double v : lf.log_var.data()) {
    CHECK(v >= -10.0);
    CHECK(v <= 10.0);
  }
}

TEST_CASE("checkpoint round trip restores parameters bit-exactly") {
  ConvCnp<double> model(tiny_cnp(), 50);
  const auto fp = model.config().fingerprint();

  std::ostringstream os;
  write_checkpoint(os, ModelKind::kConvCnp, fp, model.params());
  const std::string blob = os.str();

  std::map<std::string, std::vector<double>> saved;
  for (const auto& [name, t] : model.params().named()) saved[name] = t.data();
  for (auto& [name, t] : model.params().named())
    for (auto& v : t.data()) v += 1.5;

  std::istringstream is(blob);
  load_checkpoint(is, ModelKind::kConvCnp, fp, model.params());
  for (const auto& [name, t] : model.params().named())
    CHECK(t.data() == saved[name]);
}

TEST_CASE("checkpoint loading rejects the wrong architecture") {
  ConvCnp<double> model(tiny_cnp(), 50);
  const auto fp = model.config().fingerprint();
  std::ostringstream os;
  write_checkpoint(os, ModelKind::kConvCnp, fp, model.params());
  const std::string blob = os.str();

  {
    std::istringstream is(blob);
    CHECK_THROWS_WITH_AS(
        load_checkpoint(is, ModelKind::kUNet, fp, model.params()),
        doctest::Contains("model kind mismatch"), std::runtime_error);
  }
  {
    std::istringstream is(blob);
    CHECK_THROWS_WITH_AS(
        load_checkpoint(is, ModelKind::kConvCnp, fp + 1, model.params()),
        doctest::Contains("fingerprint mismatch"), std::runtime_error);
  }
  {
    ConvCnpConfig other = tiny_cnp();
    other.trunk_channels = 12;
    ConvCnp<double> wide(other, 50);
    std::istringstream is(blob);
    CHECK_THROWS(load_checkpoint(is, ModelKind::kConvCnp,
                                 wide.config().fingerprint(), wide.params()));
  }
  {
    std::istringstream is(std::string("NOPE") + blob.substr(4));
    CHECK_THROWS_WITH_AS(
        load_checkpoint(is, ModelKind::kConvCnp, fp, model.params()),
        doctest::Contains("bad magic"), std::runtime_error);
  }
}

TEST_CASE("configuration fingerprints separate architectures") {
  ConvCnpConfig a = tiny_cnp(), b = tiny_cnp();
  b.trunk_channels += 1;
  CHECK(a.fingerprint() == ConvCnpConfig(a).fingerprint());
  CHECK(a.fingerprint() != b.fingerprint());
  ConvLnpConfig l = tiny_lnp();
  CHECK(l.fingerprint() != a.fingerprint());
}
