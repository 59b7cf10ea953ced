#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "scanfill/tensor.hpp"

using scanfill::Rng;
using scanfill::Shape;
using scanfill::Tensor;

TEST_CASE("elementwise basics") {
  auto x = Tensor<double>::from_data({3}, {-1.0, 0.0, 2.0});
  auto r = scanfill::relu(x);
  CHECK(r.data() == std::vector<double>{0.0, 0.0, 2.0});
  CHECK(scanfill::sigmoid(Tensor<double>::scalar(0.0)).item() ==
        doctest::Approx(0.5));
  CHECK(scanfill::tanh(Tensor<double>::scalar(0.0)).item() ==
        doctest::Approx(0.0));
}

TEST_CASE("sum of squares gradient is 2x") {
  auto x = Tensor<double>::from_data({4}, {1.0, -2.0, 3.0, 0.5});
  x.set_requires_grad();
  auto loss = scanfill::sum(scanfill::square(x));
  scanfill::backward(loss);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]));
}

TEST_CASE("loss = sum(3x) gives grad 3 everywhere") {
  auto x = Tensor<double>::zeros({2, 3, 4});
  x.set_requires_grad();
  auto loss = scanfill::sum(x * 3.0);
  scanfill::backward(loss);
  for (double g : x.grad()) CHECK(g == doctest::Approx(3.0));
}

TEST_CASE("disconnected leaf keeps zero grad") {
  auto x = Tensor<double>::from_data({2}, {1.0, 2.0});
  auto y = Tensor<double>::from_data({2}, {3.0, 4.0});
  x.set_requires_grad();
  y.set_requires_grad();
  y.zero_grad();
  auto loss = scanfill::sum(x);
  scanfill::backward(loss);
  CHECK(y.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backward accumulate vs reset modes") {
  auto x = Tensor<double>::from_data({2}, {1.0, 1.0});
  x.set_requires_grad();
  auto l1 = scanfill::sum(x * 2.0);
  scanfill::backward(l1);
  auto l2 = scanfill::sum(x * 5.0);
  scanfill::backward(l2, /*accumulate=*/true);
  CHECK(x.grad()[0] == doctest::Approx(7.0));
  auto l3 = scanfill::sum(x);
  scanfill::backward(l3);  // reset mode
  CHECK(x.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("backward rejects non-scalar loss") {
  auto x = Tensor<double>::zeros({3});
  x.set_requires_grad();
  CHECK_THROWS_AS(scanfill::backward(x + 1.0), std::invalid_argument);
}

TEST_CASE("broadcasting shapes and gradients") {
  Rng rng(11);
  auto a = oracles::random_tensor({2, 3, 4}, rng);
  auto b = oracles::random_tensor({3, 1}, rng);
  a.set_requires_grad();
  b.set_requires_grad();
  auto out = a * b;
  CHECK(out.shape() == Shape{2, 3, 4});
  std::vector<scanfill::Tensor<double>> params{a, b};
  const double err = oracles::grad_check(
      params, [&] { return scanfill::sum(scanfill::square(a * b + a)); });
  CHECK(err < 1e-6);
}

TEST_CASE("broadcast mismatch rejected") {
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({4});
  CHECK_THROWS_AS(a + b, std::invalid_argument);
}

TEST_CASE("broadcast associativity within 1e-6 at 32-bit") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto mk = [&](Shape s) {
      auto t = Tensor<float>::zeros(std::move(s));
      for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-2.0, 2.0));
      return t;
    };
    auto a = mk({4, 5});
    auto b = mk({5});
    auto c = mk({1, 5});
    auto lhs = (a + b) + c;
    auto rhs = a + (b + c);
    for (std::size_t i = 0; i < lhs.data().size(); ++i)
      CHECK(lhs.data()[i] == doctest::Approx(rhs.data()[i]).epsilon(1e-6));
  }
}

TEST_CASE("reductions over axes") {
  auto x = Tensor<double>::from_data({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(scanfill::mean(x).item() == doctest::Approx(2.5));
  auto s0 = scanfill::sum(x, 0);
  CHECK(s0.data() == std::vector<double>{4.0, 6.0});
  auto s1 = scanfill::sum(x, 1);
  CHECK(s1.data() == std::vector<double>{3.0, 7.0});
  CHECK_THROWS_AS(scanfill::sum(x, 2), std::invalid_argument);
}

TEST_CASE("max reduction routes gradient to lowest-index tie") {
  auto x = Tensor<double>::from_data({1, 4}, {2.0, 5.0, 5.0, 1.0});
  x.set_requires_grad();
  auto m = scanfill::max(x, 1);
  CHECK(m.data()[0] == doctest::Approx(5.0));
  scanfill::backward(scanfill::sum(m));
  CHECK(x.grad() == std::vector<double>{0.0, 1.0, 0.0, 0.0});
}

TEST_CASE("div by exact zero flags non-finite") {
  auto a = Tensor<double>::from_data({2}, {1.0, 2.0});
  auto b = Tensor<double>::from_data({2}, {1.0, 0.0});
  auto q = a / b;
  CHECK(!scanfill::all_finite(q));
}

TEST_CASE("narrow and concat round trip with gradients") {
  Rng rng(3);
  auto x = oracles::random_tensor({2, 6, 3}, rng);
  x.set_requires_grad();
  auto left = scanfill::narrow(x, 1, 0, 2);
  auto right = scanfill::narrow(x, 1, 2, 4);
  auto back = scanfill::concat<double>({left, right}, 1);
  CHECK(back.data() == x.data());
  std::vector<scanfill::Tensor<double>> params{x};
  const double err = oracles::grad_check(params, [&] {
    auto l = scanfill::narrow(x, 1, 1, 3);
    return scanfill::sum(scanfill::square(l));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("finite differences across the elementwise suite") {
  Rng rng(17);
  int cases = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Shape s{1 + static_cast<std::int64_t>(rng.below(3)),
            1 + static_cast<std::int64_t>(rng.below(4))};
    auto x = oracles::random_tensor(s, rng, 0.2, 1.5);
    auto y = oracles::random_tensor(s, rng, 0.2, 1.5);
    x.set_requires_grad();
    y.set_requires_grad();
    std::vector<scanfill::Tensor<double>> params{x, y};
    const double err = oracles::grad_check(params, [&] {
      auto t = scanfill::exp(x * 0.3) + scanfill::log(y) -
               scanfill::sigmoid(x * y) + scanfill::tanh(x - y) +
               scanfill::sqrt(y) / (x + 2.0);
      return scanfill::mean(scanfill::square(t));
    });
    CHECK(err < 1e-4);
    ++cases;
  }
  CHECK(cases == 20);
}

TEST_CASE("determinism: same seed, same values bitwise") {
  auto run = [] {
    Rng rng(123);
    auto x = oracles::random_tensor({3, 7}, rng);
    auto y = scanfill::sum(scanfill::sigmoid(x * 1.7) + scanfill::exp(x * -0.5));
    return y.item();
  };
  CHECK(run() == run());
}
