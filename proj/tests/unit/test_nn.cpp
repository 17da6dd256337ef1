#include <catch2/catch_amalgamated.hpp>

#include <functional>

#include "densephys/core/rng.hpp"
#include "densephys/nn/adam.hpp"
#include "densephys/nn/gradcheck.hpp"
#include "densephys/nn/layers.hpp"
#include "densephys/nn/tensor.hpp"

using namespace dpn;

namespace {

template <typename S>
Tensor<S> random_tensor(int n, int h, int w, int c, Xoshiro256ss& rng,
                        double scale = 1.0) {
  Tensor<S> t(n, h, w, c);
  for (auto& v : t.v) v = static_cast<S>(rng.normal() * scale);
  return t;
}

/// Mean squared error against a fixed target plus its input gradient.
template <typename S>
double mse_to(const Tensor<S>& y, const Tensor<S>& target,
              Tensor<S>* dy = nullptr) {
  double total = 0.0;
  if (dy) *dy = Tensor<S>::zeros_like(y);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double diff =
        static_cast<double>(y.v[i]) - static_cast<double>(target.v[i]);
    total += diff * diff;
    if (dy) dy->v[i] = static_cast<S>(2.0 * diff / y.size());
  }
  return total / y.size();
}

}  // namespace

TEST_CASE("tensor indexing is channel-fastest", "[nn]") {
  Tensor<float> t(2, 3, 4, 5);
  REQUIRE(t.size() == 2u * 3 * 4 * 5);
  REQUIRE(t.index(0, 0, 0, 1) == 1);
  REQUIRE(t.index(0, 0, 1, 0) == 5);
  REQUIRE(t.index(0, 1, 0, 0) == 20);
  REQUIRE(t.index(1, 0, 0, 0) == 60);
  t.at(1, 2, 3, 4) = 7.0f;
  REQUIRE(t.v.back() == 7.0f);
  REQUIRE_THROWS_AS(t.as_matrix(7, 7), std::logic_error);
}

TEST_CASE("conv with a centred delta kernel is the identity", "[nn]") {
  auto rng = seeded_rng(61, "conv-id");
  Conv2d<float> conv("conv", 3, 3, 3);
  for (int ch = 0; ch < 3; ++ch)
    conv.W((1 * 3 + 1) * 3 + ch, ch) = 1.0f;  // centre tap, matched channels
  const Tensor<float> x = random_tensor<float>(2, 5, 6, 3, rng);
  const Tensor<float> y = conv.forward(x, nullptr);
  for (std::size_t i = 0; i < x.size(); ++i)
    REQUIRE(y.v[i] == Catch::Approx(x.v[i]).margin(1e-6));
}

TEST_CASE("conv matches a hand-computed case with padding", "[nn]") {
  Conv2d<double> conv("conv", 1, 1, 3);
  for (int i = 0; i < 9; ++i) conv.W(i, 0) = 1.0;  // box filter
  conv.b(0) = 0.5;
  Tensor<double> x(1, 2, 2, 1);
  x.at(0, 0, 0, 0) = 1.0;
  x.at(0, 0, 1, 0) = 2.0;
  x.at(0, 1, 0, 0) = 3.0;
  x.at(0, 1, 1, 0) = 4.0;
  const Tensor<double> y = conv.forward(x, nullptr);
  // Every output sees all four inputs (3x3 box over a 2x2 image).
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      REQUIRE(y.at(0, r, c, 0) == Catch::Approx(10.5));
}

TEST_CASE("conv rejects channel mismatches and even kernels", "[nn]") {
  Conv2d<float> conv("conv", 4, 2, 3);
  Tensor<float> bad(1, 4, 4, 3);
  REQUIRE_THROWS_AS(conv.forward(bad, nullptr), std::logic_error);
  REQUIRE_THROWS_AS((Conv2d<float>("even", 1, 1, 4)), std::logic_error);
}

TEST_CASE("dense layer computes x W + b", "[nn]") {
  Dense<double> fc("fc", 2, 3);
  fc.W << 1, 2, 3, 4, 5, 6;
  fc.b << 0.1, 0.2, 0.3;
  Tensor<double> x(1, 1, 1, 2);
  x.v = {1.0, -1.0};
  const Tensor<double> y = fc.forward(x, nullptr);
  REQUIRE(y.v[0] == Catch::Approx(1 - 4 + 0.1));
  REQUIRE(y.v[1] == Catch::Approx(2 - 5 + 0.2));
  REQUIRE(y.v[2] == Catch::Approx(3 - 6 + 0.3));
}

TEST_CASE("batch norm standardises per channel in training mode", "[nn]") {
  auto rng = seeded_rng(62, "bn");
  BatchNorm<double> bn("bn", 3);
  const Tensor<double> x = random_tensor<double>(4, 3, 3, 3, rng, 2.5);
  typename BatchNorm<double>::Cache cache;
  const Tensor<double> y = bn.forward(x, &cache, true);
  auto ym = y.rows();
  for (int ch = 0; ch < 3; ++ch) {
    const double mean = ym.col(ch).mean();
    const double var =
        (ym.col(ch).array() - mean).square().mean();
    REQUIRE(mean == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(var == Catch::Approx(1.0).margin(1e-3));
  }
}

TEST_CASE("batch norm evaluation uses running statistics", "[nn]") {
  auto rng = seeded_rng(63, "bn-eval");
  BatchNorm<double> bn("bn", 2);
  for (int i = 0; i < 200; ++i)
    bn.forward(random_tensor<double>(4, 4, 4, 2, rng), nullptr, true);
  Tensor<double> x(1, 1, 1, 2);
  x.v = {0.0, 0.0};
  const Tensor<double> y = bn.forward(x, nullptr, false);
  // Running mean ~0, var ~1 after many standard-normal batches.
  REQUIRE(y.v[0] == Catch::Approx(0.0).margin(0.1));
  REQUIRE(y.v[1] == Catch::Approx(0.0).margin(0.1));
  const Tensor<double> y2 = bn.forward(x, nullptr, false);
  REQUIRE(y.v[0] == y2.v[0]);  // eval mode does not drift
}

TEST_CASE("relu and sigmoid forward values", "[nn]") {
  Tensor<double> x(1, 1, 1, 4);
  x.v = {-1.0, 0.0, 2.0, -0.5};
  ReluCache<double> rc;
  const Tensor<double> r = relu_forward(x, &rc);
  REQUIRE(r.v == std::vector<double>{0.0, 0.0, 2.0, 0.0});
  SigmoidCache<double> sc;
  const Tensor<double> s = sigmoid_forward(x, &sc);
  REQUIRE(s.v[1] == Catch::Approx(0.5));
  REQUIRE(s.v[2] == Catch::Approx(1.0 / (1.0 + std::exp(-2.0))));
}

TEST_CASE("cross conv with delta kernels is the identity", "[nn]") {
  auto rng = seeded_rng(64, "cc-id");
  CrossConv<float> cc(5);
  const Tensor<float> x = random_tensor<float>(2, 6, 6, 4, rng);
  Tensor<float> kernels(2, 5, 5, 4);
  for (int n = 0; n < 2; ++n)
    for (int ch = 0; ch < 4; ++ch) kernels.at(n, 2, 2, ch) = 1.0f;
  const Tensor<float> y = cc.forward(x, kernels, nullptr);
  for (std::size_t i = 0; i < x.size(); ++i)
    REQUIRE(y.v[i] == Catch::Approx(x.v[i]).margin(1e-6));
}

TEST_CASE("cross conv shifts with an off-centre delta", "[nn]") {
  CrossConv<float> cc(5);
  Tensor<float> x(1, 6, 6, 1);
  x.at(0, 3, 3, 0) = 1.0f;
  Tensor<float> kernels(1, 5, 5, 1);
  kernels.at(0, 2, 4, 0) = 1.0f;  // two columns right of centre
  const Tensor<float> y = cc.forward(x, kernels, nullptr);
  // Correlation with a tap at (0, +2) reads from (r, c+2): response at c=1.
  REQUIRE(y.at(0, 3, 1, 0) == 1.0f);
  float total = 0.0f;
  for (float v : y.v) total += v;
  REQUIRE(total == 1.0f);
}

TEST_CASE("cross conv applies per-sample, per-channel kernels", "[nn]") {
  CrossConv<double> cc(5);
  Tensor<double> x(2, 4, 4, 2);
  x.fill(1.0);
  Tensor<double> kernels(2, 5, 5, 2);
  kernels.at(0, 2, 2, 0) = 2.0;  // sample 0, channel 0 doubled
  kernels.at(0, 2, 2, 1) = 3.0;
  kernels.at(1, 2, 2, 0) = 5.0;
  kernels.at(1, 2, 2, 1) = 7.0;
  const Tensor<double> y = cc.forward(x, kernels, nullptr);
  REQUIRE(y.at(0, 1, 1, 0) == Catch::Approx(2.0));
  REQUIRE(y.at(0, 1, 1, 1) == Catch::Approx(3.0));
  REQUIRE(y.at(1, 1, 1, 0) == Catch::Approx(5.0));
  REQUIRE(y.at(1, 1, 1, 1) == Catch::Approx(7.0));
  Tensor<double> bad(2, 3, 3, 2);
  REQUIRE_THROWS_AS(cc.forward(x, bad, nullptr), std::logic_error);
}

TEST_CASE("residual block with zero conv weights is an exact identity",
          "[nn]") {
  auto rng = seeded_rng(65, "res-id");
  ResidualBlock<double> block("block", 3);
  const Tensor<double> x = random_tensor<double>(2, 4, 4, 3, rng);
  typename ResidualBlock<double>::Cache cache;
  const Tensor<double> y = block.forward(x, &cache, true);
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(y.v[i] == x.v[i]);
}

TEMPLATE_TEST_CASE("layer gradients match finite differences", "[nn][grad]",
                   double, float) {
  using S = TestType;
  const double h = std::is_same_v<S, double> ? 1e-6 : 1e-3;
  const double tol = std::is_same_v<S, double> ? 1e-6 : 1e-3;
  auto rng = seeded_rng(66, "gradcheck");

  SECTION("conv2d") {
    Conv2d<S> conv("conv", 2, 3, 3);
    conv.init(rng);
    Tensor<S> x = random_tensor<S>(2, 4, 5, 2, rng);
    const Tensor<S> target = random_tensor<S>(2, 4, 5, 3, rng);
    typename Conv2d<S>::Cache cache;
    Tensor<S> dy;
    mse_to(conv.forward(x, &cache), target, &dy);
    conv.zero_grad();
    Tensor<S> dx = conv.backward(cache, dy);
    const auto loss = [&] {
      return mse_to(conv.forward(x, nullptr), target);
    };
    REQUIRE(max_grad_error(conv.W.data(), conv.gW.data(),
                           conv.W.size(), loss, h) < tol);
    REQUIRE(max_grad_error(conv.b.data(), conv.gb.data(),
                           conv.b.size(), loss, h) < tol);
    REQUIRE(max_grad_error(x.data(), dx.data(), x.size(), loss, h) < tol);
  }

  SECTION("dense") {
    Dense<S> fc("fc", 5, 4);
    fc.init(rng);
    Tensor<S> x = random_tensor<S>(3, 1, 1, 5, rng);
    const Tensor<S> target = random_tensor<S>(3, 1, 1, 4, rng);
    typename Dense<S>::Cache cache;
    Tensor<S> dy;
    mse_to(fc.forward(x, &cache), target, &dy);
    fc.zero_grad();
    Tensor<S> dx = fc.backward(cache, dy);
    const auto loss = [&] {
      return mse_to(fc.forward(x, nullptr), target);
    };
    REQUIRE(max_grad_error(fc.W.data(), fc.gW.data(), fc.W.size(), loss, h) <
            tol);
    REQUIRE(max_grad_error(x.data(), dx.data(), x.size(), loss, h) < tol);
  }

  SECTION("batch norm") {
    BatchNorm<S> bn("bn", 3);
    Tensor<S> x = random_tensor<S>(3, 3, 3, 3, rng);
    const Tensor<S> target = random_tensor<S>(3, 3, 3, 3, rng);
    typename BatchNorm<S>::Cache cache;
    Tensor<S> dy;
    mse_to(bn.forward(x, &cache, true), target, &dy);
    bn.zero_grad();
    Tensor<S> dx = bn.backward(cache, dy);
    const auto loss = [&] {
      return mse_to(bn.forward(x, nullptr, true), target);
    };
    REQUIRE(max_grad_error(bn.gamma.data(), bn.ggamma.data(),
                           bn.gamma.size(), loss, h) < tol);
    REQUIRE(max_grad_error(bn.beta.data(), bn.gbeta.data(), bn.beta.size(),
                           loss, h) < tol);
    REQUIRE(max_grad_error(x.data(), dx.data(), x.size(), loss, h) < tol);
  }

  SECTION("cross conv") {
    CrossConv<S> cc(3);
    Tensor<S> x = random_tensor<S>(2, 4, 4, 2, rng);
    Tensor<S> kernels = random_tensor<S>(2, 3, 3, 2, rng);
    const Tensor<S> target = random_tensor<S>(2, 4, 4, 2, rng);
    typename CrossConv<S>::Cache cache;
    Tensor<S> dy;
    mse_to(cc.forward(x, kernels, &cache), target, &dy);
    Tensor<S> dx, dk;
    cc.backward(cache, dy, &dx, &dk);
    const auto loss = [&] {
      return mse_to(cc.forward(x, kernels, nullptr), target);
    };
    REQUIRE(max_grad_error(x.data(), dx.data(), x.size(), loss, h) < tol);
    REQUIRE(max_grad_error(kernels.data(), dk.data(), kernels.size(), loss,
                           h) < tol);
  }

  SECTION("residual block") {
    ResidualBlock<S> block("block", 2);
    block.init(rng);
    Tensor<S> x = random_tensor<S>(2, 4, 4, 2, rng);
    const Tensor<S> target = random_tensor<S>(2, 4, 4, 2, rng);
    typename ResidualBlock<S>::Cache cache;
    Tensor<S> dy;
    mse_to(block.forward(x, &cache, true), target, &dy);
    block.zero_grad();
    Tensor<S> dx = block.backward(cache, dy);
    const auto loss = [&] {
      return mse_to(block.forward(x, nullptr, true), target);
    };
    REQUIRE(max_grad_error(x.data(), dx.data(), x.size(), loss, h) < tol);
    for (auto& p : block.params())
      REQUIRE(max_grad_error(p.value, p.grad, p.size, loss, h) < tol);
  }
}

TEST_CASE("adam minimises a quadratic", "[nn]") {
  Tensor<double> w(1, 1, 1, 3);
  Tensor<double> g(1, 1, 1, 3);
  w.v = {5.0, -4.0, 2.0};
  std::vector<ParamRef<double>> refs = {
      {"w", w.data(), g.data(), 3, {3}}};
  Adam<double> opt(refs, 0.1, 0.9, 0.95);
  for (int i = 0; i < 500; ++i) {
    if (i > 0 && i % 100 == 0) opt.set_lr(opt.lr() * 0.25);
    for (int j = 0; j < 3; ++j) g.v[j] = 2.0 * w.v[j];
    opt.step();
  }
  for (double v : w.v) REQUIRE(std::abs(v) < 1e-3);
  REQUIRE(opt.steps_taken() == 500);
}

TEST_CASE("adam rejects non-finite gradients", "[nn]") {
  Tensor<float> w(1, 1, 1, 1);
  Tensor<float> g(1, 1, 1, 1);
  g.v[0] = std::numeric_limits<float>::quiet_NaN();
  Adam<float> opt({{"w", w.data(), g.data(), 1, {1}}}, 0.1, 0.9, 0.95);
  REQUIRE_THROWS_AS(opt.step(), DivergenceError);
}
