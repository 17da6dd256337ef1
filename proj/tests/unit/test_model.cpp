#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "densephys/core/config.hpp"
#include "densephys/data/generate.hpp"
#include "densephys/model/checkpoint.hpp"
#include "densephys/model/net.hpp"
#include "densephys/model/train.hpp"
#include "densephys/nn/gradcheck.hpp"

namespace {

using namespace dpn;

RunConfig small_cfg() {
  RunConfig cfg;
  cfg.grid_size = 32;
  cfg.residual_depth = 2;
  cfg.batch = 2;
  return cfg;
}

template <typename S>
Tensor<S> random_tensor(int n, int h, int w, int c, Xoshiro256ss& rng) {
  Tensor<S> t(n, h, w, c);
  for (auto& v : t.v) v = static_cast<S>(rng.normal());
  return t;
}

}  // namespace

TEST_CASE("network forward produces the documented shapes", "[model]") {
  RunConfig cfg = small_cfg();
  DensePhysNet<float> net(cfg);
  net.init(11);
  auto rng = seeded_rng(12, "model-shapes");
  const auto depth = random_tensor<float>(2, 32, 32, 1, rng);
  const auto avec = random_tensor<float>(2, 1, 1, 26, rng);
  const auto carry = net.zero_carry(2, 32);
  auto out = net.forward_step(depth, avec, carry, nullptr, false);
  REQUIRE(out.flow.n == 2);
  REQUIRE(out.flow.h == 32);
  REQUIRE(out.flow.w == 32);
  REQUIRE(out.flow.c == 2);
  REQUIRE(out.rp.c == DensePhysNet<float>::kChannels);
  REQUIRE(out.ra.c == DensePhysNet<float>::kChannels);

  auto again = net.forward_step(depth, avec, carry, nullptr, false);
  REQUIRE(out.flow.v == again.flow.v);

  Tensor<float> bad_avec(2, 1, 1, 37);
  REQUIRE_THROWS_AS(net.forward_step(depth, bad_avec, carry, nullptr, false),
                    std::logic_error);
  Tensor<float> bad_carry(2, 16, 16, 32);
  REQUIRE_THROWS_AS(net.forward_step(depth, avec, bad_carry, nullptr, false),
                    std::logic_error);
}

TEST_CASE("initialisation is seed-deterministic per layer", "[model]") {
  RunConfig cfg = small_cfg();
  DensePhysNet<float> a(cfg), b(cfg), c(cfg);
  a.init(5);
  b.init(5);
  c.init(6);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  bool any_differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i].name == pb[i].name);
    for (std::size_t j = 0; j < pa[i].size; ++j) {
      REQUIRE(pa[i].value[j] == pb[i].value[j]);
      if (pa[i].value[j] != pc[i].value[j]) any_differs = true;
    }
  }
  REQUIRE(any_differs);
}

TEST_CASE("inference leaves normalisation buffers untouched", "[model]") {
  RunConfig cfg = small_cfg();
  DensePhysNet<float> net(cfg);
  net.init(21);
  auto rng = seeded_rng(22, "model-buffers");
  const auto depth = random_tensor<float>(1, 32, 32, 1, rng);
  const auto avec = random_tensor<float>(1, 1, 1, 26, rng);
  const auto carry = net.zero_carry(1, 32);

  std::vector<float> before;
  for (auto& b : net.buffers())
    before.insert(before.end(), b.value, b.value + b.size);
  net.compute_rp(depth, carry);
  net.forward_step(depth, avec, carry, nullptr, false);
  std::vector<float> after;
  for (auto& b : net.buffers())
    after.insert(after.end(), b.value, b.value + b.size);
  REQUIRE(before == after);

  typename DensePhysNet<float>::StepTape tape;
  net.forward_step(depth, avec, carry, &tape, true);
  std::vector<float> trained;
  for (auto& b : net.buffers())
    trained.insert(trained.end(), b.value, b.value + b.size);
  REQUIRE(before != trained);
}

TEST_CASE("checkpoints restore every parameter bit-exactly", "[model]") {
  RunConfig cfg = small_cfg();
  DensePhysNet<float> a(cfg), b(cfg);
  a.init(31);
  b.init(32);

  namespace fs = std::filesystem;
  const auto path = (fs::temp_directory_path() / "dpn-ckpt.dpck").string();
  auto ta = checkpoint_tensors(a);
  write_checkpoint(path, ta, nlohmann::json{{"purpose", "test"}});

  auto tb = checkpoint_tensors(b);
  const auto meta = read_checkpoint(path, tb);
  REQUIRE(meta.at("purpose") == "test");
  for (std::size_t i = 0; i < ta.size(); ++i) {
    REQUIRE(ta[i].name == tb[i].name);
    for (std::size_t j = 0; j < ta[i].size; ++j)
      REQUIRE(ta[i].value[j] == tb[i].value[j]);
  }

  SECTION("corruption is rejected") {
    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> bytes(
        (std::istreambuf_iterator<char>(in)),
        std::istreambuf_iterator<char>());
    bytes[bytes.size() / 3] ^= 0x10u;
    REQUIRE_THROWS_AS(deserialize_checkpoint(bytes, tb), FormatError);
  }

  SECTION("architecture mismatch is rejected") {
    RunConfig deeper = cfg;
    deeper.residual_depth = 3;
    DensePhysNet<float> c(deeper);
    auto tc = checkpoint_tensors(c);
    REQUIRE_THROWS_AS(read_checkpoint(path, tc), FormatError);
  }
  fs::remove(path);
}

TEST_CASE("whole-step gradients match finite differences",
          "[model][grad]") {
  RunConfig cfg = small_cfg();
  cfg.residual_depth = 2;
  DensePhysNet<double> net(cfg);
  net.init(41);
  auto rng = seeded_rng(42, "model-grad");
  const auto depth = random_tensor<double>(1, 32, 32, 1, rng);
  const auto avec = random_tensor<double>(1, 1, 1, 26, rng);
  const auto carry = random_tensor<double>(1, 32, 32, 32, rng);
  auto target = random_tensor<double>(1, 32, 32, 2, rng);

  typename DensePhysNet<double>::StepTape tape;
  auto out = net.forward_step(depth, avec, carry, &tape, true);
  Tensor<double> dflow;
  mse_loss(out.flow, target, &dflow);
  net.zero_grad();
  net.backward_step(tape, dflow, nullptr, nullptr);

  const auto loss = [&] {
    auto o = net.forward_step(depth, avec, carry, nullptr, false);
    return mse_loss(o.flow, target);
  };
  const double h = 1e-6, tol = 1e-6;
  for (auto& p : net.params()) {
    const std::size_t stride = std::max<std::size_t>(1, p.size / 8);
    INFO(p.name);
    REQUIRE(max_grad_error(p.value, p.grad, p.size, loss, h, stride) < tol);
  }
}

TEST_CASE("carry gradients thread through unrolled steps",
          "[model][grad]") {
  RunConfig cfg = small_cfg();
  cfg.residual_depth = 1;
  DensePhysNet<double> net(cfg);
  net.init(51);
  auto rng = seeded_rng(52, "model-bptt");
  const auto d0 = random_tensor<double>(1, 32, 32, 1, rng);
  const auto d1 = random_tensor<double>(1, 32, 32, 1, rng);
  const auto a0 = random_tensor<double>(1, 1, 1, 26, rng);
  const auto a1 = random_tensor<double>(1, 1, 1, 26, rng);
  const auto t0 = random_tensor<double>(1, 32, 32, 2, rng);
  const auto t1 = random_tensor<double>(1, 32, 32, 2, rng);
  const auto carry0 = net.zero_carry(1, 32);

  typename DensePhysNet<double>::StepTape tape0, tape1;
  auto s0 = net.forward_step(d0, a0, carry0, &tape0, true);
  auto s1 = net.forward_step(d1, a1, s0.ra, &tape1, true);
  Tensor<double> df0, df1;
  mse_loss(s0.flow, t0, &df0);
  mse_loss(s1.flow, t1, &df1);
  net.zero_grad();
  Tensor<double> dcarry1;
  net.backward_step(tape1, df1, nullptr, &dcarry1);
  net.backward_step(tape0, df0, &dcarry1, nullptr);

  const auto loss = [&] {
    auto o0 = net.forward_step(d0, a0, carry0, nullptr, false);
    auto o1 = net.forward_step(d1, a1, o0.ra, nullptr, false);
    return mse_loss(o0.flow, t0) + mse_loss(o1.flow, t1);
  };
  const double h = 1e-6, tol = 1e-6;
  for (auto& p : net.params()) {
    const std::size_t stride = std::max<std::size_t>(1, p.size / 6);
    INFO(p.name);
    REQUIRE(max_grad_error(p.value, p.grad, p.size, loss, h, stride) < tol);
  }
}

TEST_CASE("a single batch can be memorised", "[model]") {
  RunConfig cfg = small_cfg();
  cfg.residual_depth = 2;
  cfg.lr0 = 2e-3;
  DensePhysNet<float> net(cfg);
  net.init(61);
  GenSpec spec;
  spec.steps = 2;
  spec.objects = 1;
  spec.master_seed = 62;
  const EpisodeData ep = generate_episode(cfg, spec, 0);

  std::vector<const EpisodeData*> batch = {&ep};
  Adam<float> opt(net.params(), cfg.lr0, cfg.beta1, cfg.beta2);
  double first = -1.0, last = -1.0;
  for (int it = 0; it < 60; ++it) {
    Tensor<float> carry = net.zero_carry(1, 32);
    double sum = 0.0;
    for (int t = 0; t < spec.steps; ++t) {
      const auto depth = detail::depth_batch<float>(batch, t, 32);
      const auto avec = detail::avec_batch<float>(batch, t, 26);
      const auto gt = detail::flow_batch<float>(batch, t, 32);
      typename DensePhysNet<float>::StepTape tape;
      auto out = net.forward_step(depth, avec, carry, &tape, true);
      Tensor<float> dflow;
      sum += mse_loss(out.flow, gt, &dflow);
      opt.zero_grad();
      net.backward_step(tape, dflow, nullptr, nullptr);
      opt.step();
      carry = std::move(out.ra);
    }
    if (it == 0) first = sum;
    last = sum;
  }
  REQUIRE(last < first / 5.0);
}

TEST_CASE("the trainer makes deterministic progress in both modes",
          "[model]") {
  RunConfig cfg = small_cfg();
  cfg.residual_depth = 2;
  cfg.epochs = 2;
  GenSpec spec;
  spec.episodes = 4;
  spec.steps = 2;
  spec.objects = 1;
  spec.master_seed = 71;
  std::vector<EpisodeData> eps;
  for (int i = 0; i < spec.episodes; ++i)
    eps.push_back(generate_episode(cfg, spec, i));

  auto run = [&](bool bptt) {
    RunConfig c = cfg;
    c.bptt = bptt;
    DensePhysNet<float> net(c);
    net.init(72);
    Trainer<float> trainer(net, c);
    std::vector<double> losses;
    for (int e = 0; e < c.epochs; ++e)
      losses.push_back(trainer.run_epoch(eps, e));
    return losses;
  };

  const auto detached1 = run(false);
  const auto detached2 = run(false);
  REQUIRE(detached1 == detached2);
  REQUIRE(detached1.back() < detached1.front());

  const auto unrolled = run(true);
  REQUIRE(unrolled.size() == 2);
  REQUIRE(std::isfinite(unrolled.back()));
  REQUIRE(unrolled.back() < unrolled.front());
}
