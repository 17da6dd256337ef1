#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "densephys/core/config.hpp"
#include "densephys/core/rng.hpp"
#include "densephys/nn/layers.hpp"
#include "densephys/nn/tensor.hpp"

namespace dpn {

namespace detail {

template <typename S>
Tensor<S> reshape_tensor(const Tensor<S>& t, int n, int h, int w, int c) {
  Tensor<S> out(n, h, w, c);
  if (out.size() != t.size())
    throw std::logic_error("reshape from " + t.shape_str() + " changes size");
  out.v = t.v;
  return out;
}

}  // namespace detail

/// Flow-prediction network over top-down depth frames.  A convolutional
/// encoder lifts the frame to a 32-channel map R_v; a sigmoid gate fuses it
/// with the carried map from the previous step into the dense physical
/// representation R_p; a stack of residual blocks refines it; the action
/// vector is expanded into per-sample 5x5 kernels that cross-convolve R_p
/// into the action-conditioned map R_a, from which a small head predicts
/// dense pixel flow.  R_a is also the carry handed to the next step.
///
/// Activation scale is not stationary across interaction steps (the carry
/// starts at zero and grows), so batch-norm running averages represent no
/// step well.  Every forward pass therefore normalises with batch
/// statistics; `train` only controls whether the running buffers are
/// updated and whether layer caches are recorded.
template <typename S>
class DensePhysNet {
 public:
  static constexpr int kChannels = 32;
  static constexpr int kCrossKernel = 5;

  /// Per-step caches for one forward pass, consumed by `backward_step`.
  struct StepTape {
    typename Conv2d<S>::Cache enc_c1, enc_c2, enc_c3, enc_c4;
    typename BatchNorm<S>::Cache enc_b1, enc_b2, enc_b3;
    ReluCache<S> enc_r1, enc_r2, enc_r3;
    typename Conv2d<S>::Cache f_c, g_c;
    SigmoidCache<S> gate;
    Tensor<S> f_out, gate_s, carry, rv_holder;
    std::vector<typename ResidualBlock<S>::Cache> blocks;
    std::vector<typename Dense<S>::Cache> act_fc;
    std::vector<ReluCache<S>> act_relu;
    typename CrossConv<S>::Cache cross;
    typename Conv2d<S>::Cache pred_c1, pred_c2, pred_c3, pred_c4;
    typename BatchNorm<S>::Cache pred_b1, pred_b2, pred_b3;
    ReluCache<S> pred_r1, pred_r2, pred_r3;
  };

  struct StepOut {
    Tensor<S> flow;
    Tensor<S> rv;
    Tensor<S> rp;
    Tensor<S> ra;
  };

  explicit DensePhysNet(const RunConfig& cfg)
      : awidth_(cfg.action_width), depth_(cfg.residual_depth),
        enc_c1_("enc.conv1", 1, kChannels, 11),
        enc_c2_("enc.conv2", kChannels, kChannels, 5),
        enc_c3_("enc.conv3", kChannels, kChannels, 3),
        enc_c4_("enc.conv4", kChannels, kChannels, 3),
        enc_b1_("enc.bn1", kChannels), enc_b2_("enc.bn2", kChannels),
        enc_b3_("enc.bn3", kChannels), f_("fuse.f", kChannels, kChannels, 1),
        g_("fuse.g", kChannels, kChannels, 1), cross_(kCrossKernel),
        pred_c1_("pred.conv1", kChannels, kChannels, 3),
        pred_c2_("pred.conv2", kChannels, kChannels, 3),
        pred_c3_("pred.conv3", kChannels, kChannels, 3),
        pred_c4_("pred.conv4", kChannels, 2, 3),
        pred_b1_("pred.bn1", kChannels), pred_b2_("pred.bn2", kChannels),
        pred_b3_("pred.bn3", kChannels) {
    for (int i = 0; i < depth_; ++i)
      blocks_.emplace_back("block" + std::to_string(i), kChannels);
    const int dims[8] = {awidth_, 64,  128, 256,
                         256,     256, 512, kCrossKernel * kCrossKernel *
                                                kChannels};
    for (int i = 0; i < 7; ++i)
      act_fc_.emplace_back("act.fc" + std::to_string(i + 1), dims[i],
                           dims[i + 1]);
  }

  /// Draws every parameter from its own named stream, so layer order does
  /// not affect any layer's draw.
  void init(std::uint64_t seed) {
    auto stream = [seed](const std::string& tag) {
      return seeded_rng(seed, "init/" + tag);
    };
    auto r1 = stream("enc.conv1");
    enc_c1_.init(r1);
    auto r2 = stream("enc.conv2");
    enc_c2_.init(r2);
    auto r3 = stream("enc.conv3");
    enc_c3_.init(r3);
    auto r4 = stream("enc.conv4");
    enc_c4_.init(r4);
    auto rf = stream("fuse.f");
    f_.init(rf);
    auto rg = stream("fuse.g");
    g_.init(rg);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      auto rb = stream("block" + std::to_string(i));
      blocks_[i].init(rb);
    }
    for (std::size_t i = 0; i < act_fc_.size(); ++i) {
      auto ra = stream("act.fc" + std::to_string(i + 1));
      act_fc_[i].init(ra);
    }
    auto rp1 = stream("pred.conv1");
    pred_c1_.init(rp1);
    auto rp2 = stream("pred.conv2");
    pred_c2_.init(rp2);
    auto rp3 = stream("pred.conv3");
    pred_c3_.init(rp3);
    auto rp4 = stream("pred.conv4");
    pred_c4_.init(rp4);
  }

  Tensor<S> zero_carry(int n, int grid) const {
    return Tensor<S>(n, grid, grid, kChannels);
  }

  /// Encoder plus gated fusion plus residual stack: the dense physical
  /// representation for a frame given the carried map.  `tape` may be null
  /// (inference); `train` controls batch-norm buffer updates.
  Tensor<S> tower(const Tensor<S>& depth, const Tensor<S>& carry,
                  StepTape* tape, bool train) {
    check_input(depth, carry);
    auto* c = tape;
    Tensor<S> t = enc_c1_.forward(depth, c ? &c->enc_c1 : nullptr);
    t = enc_b1_.forward(t, c ? &c->enc_b1 : nullptr, true, train);
    t = relu_forward(t, c ? &c->enc_r1 : nullptr);
    t = enc_c2_.forward(t, c ? &c->enc_c2 : nullptr);
    t = enc_b2_.forward(t, c ? &c->enc_b2 : nullptr, true, train);
    t = relu_forward(t, c ? &c->enc_r2 : nullptr);
    t = enc_c3_.forward(t, c ? &c->enc_c3 : nullptr);
    t = enc_b3_.forward(t, c ? &c->enc_b3 : nullptr, true, train);
    t = relu_forward(t, c ? &c->enc_r3 : nullptr);
    Tensor<S> rv = enc_c4_.forward(t, c ? &c->enc_c4 : nullptr);

    Tensor<S> f_out = f_.forward(rv, c ? &c->f_c : nullptr);
    Tensor<S> s = g_.forward(rv, c ? &c->g_c : nullptr);
    s = sigmoid_forward(s, c ? &c->gate : nullptr);
    Tensor<S> rp = Tensor<S>::zeros_like(f_out);
    for (std::size_t i = 0; i < rp.size(); ++i)
      rp.v[i] = s.v[i] * f_out.v[i] + (S(1) - s.v[i]) * carry.v[i];
    if (c) {
      c->f_out = std::move(f_out);
      c->gate_s = s;
      c->carry = carry;
      c->rv_holder = std::move(rv);
    }
    if (c) c->blocks.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      rp = blocks_[i].forward(rp, c ? &c->blocks[i] : nullptr, true, train);
    return rp;
  }

  /// One interaction step: predicts flow and produces the next carry.
  StepOut forward_step(const Tensor<S>& depth, const Tensor<S>& avec,
                       const Tensor<S>& carry, StepTape* tape, bool train) {
    if (avec.n != depth.n || avec.h != 1 || avec.w != 1 ||
        avec.c != awidth_)
      throw std::logic_error("action batch " + avec.shape_str() +
                             " does not match depth batch or width " +
                             std::to_string(awidth_));
    auto* c = tape;
    Tensor<S> rp = tower(depth, carry, tape, train);

    Tensor<S> k = avec;
    if (c) {
      c->act_fc.resize(act_fc_.size());
      c->act_relu.resize(act_fc_.size() - 1);
    }
    for (std::size_t i = 0; i < act_fc_.size(); ++i) {
      k = act_fc_[i].forward(k, c ? &c->act_fc[i] : nullptr);
      if (i + 1 < act_fc_.size())
        k = relu_forward(k, c ? &c->act_relu[i] : nullptr);
    }
    Tensor<S> kernels =
        detail::reshape_tensor(k, depth.n, kCrossKernel, kCrossKernel,
                               kChannels);
    Tensor<S> ra = cross_.forward(rp, kernels, c ? &c->cross : nullptr);

    Tensor<S> t = pred_c1_.forward(ra, c ? &c->pred_c1 : nullptr);
    t = pred_b1_.forward(t, c ? &c->pred_b1 : nullptr, true, train);
    t = relu_forward(t, c ? &c->pred_r1 : nullptr);
    t = pred_c2_.forward(t, c ? &c->pred_c2 : nullptr);
    t = pred_b2_.forward(t, c ? &c->pred_b2 : nullptr, true, train);
    t = relu_forward(t, c ? &c->pred_r2 : nullptr);
    t = pred_c3_.forward(t, c ? &c->pred_c3 : nullptr);
    t = pred_b3_.forward(t, c ? &c->pred_b3 : nullptr, true, train);
    t = relu_forward(t, c ? &c->pred_r3 : nullptr);
    Tensor<S> flow = pred_c4_.forward(t, c ? &c->pred_c4 : nullptr);

    StepOut out;
    out.flow = std::move(flow);
    out.rv = c ? c->rv_holder : Tensor<S>();
    out.rp = std::move(rp);
    out.ra = std::move(ra);
    return out;
  }

  /// Dense physical representation for probing and planning (no caches, no
  /// buffer updates).
  Tensor<S> compute_rp(const Tensor<S>& depth, const Tensor<S>& carry) {
    return tower(depth, carry, nullptr, false);
  }

  /// Backpropagates one step.  `dflow` is the loss gradient on the predicted
  /// flow; `dra_extra`, when present, is gradient flowing into this step's
  /// R_a from the following step's carry (full backpropagation through
  /// time).  When `dcarry` is non-null it receives the gradient with respect
  /// to this step's carry input.  Returns the gradient on the depth frame.
  Tensor<S> backward_step(const StepTape& tape, const Tensor<S>& dflow,
                          const Tensor<S>* dra_extra, Tensor<S>* dcarry) {
    Tensor<S> d = pred_c4_.backward(tape.pred_c4, dflow);
    d = relu_backward(tape.pred_r3, d);
    d = pred_b3_.backward(tape.pred_b3, d);
    d = pred_c3_.backward(tape.pred_c3, d);
    d = relu_backward(tape.pred_r2, d);
    d = pred_b2_.backward(tape.pred_b2, d);
    d = pred_c2_.backward(tape.pred_c2, d);
    d = relu_backward(tape.pred_r1, d);
    d = pred_b1_.backward(tape.pred_b1, d);
    d = pred_c1_.backward(tape.pred_c1, d);
    if (dra_extra) d.add(*dra_extra);

    Tensor<S> d_rp, d_kern;
    cross_.backward(tape.cross, d, &d_rp, &d_kern);

    Tensor<S> dk = detail::reshape_tensor(
        d_kern, d_kern.n, 1, 1,
        kCrossKernel * kCrossKernel * kChannels);
#ifdef DPN_DEBUG_BWD
    DPN_DEBUG_BWD("d", d);
    DPN_DEBUG_BWD("d_kern", d_kern);
#endif
    for (std::size_t i = act_fc_.size(); i-- > 0;) {
      if (i + 1 < act_fc_.size()) dk = relu_backward(tape.act_relu[i], dk);
      dk = act_fc_[i].backward(tape.act_fc[i], dk);
#ifdef DPN_DEBUG_BWD
      DPN_DEBUG_BWD(("dk" + std::to_string(i)).c_str(), dk);
      DPN_DEBUG_BWD(("x" + std::to_string(i)).c_str(), tape.act_fc[i].x);
#endif
    }

    for (std::size_t i = blocks_.size(); i-- > 0;)
      d_rp = blocks_[i].backward(tape.blocks[i], d_rp);

    Tensor<S> d_f = Tensor<S>::zeros_like(d_rp);
    Tensor<S> d_s = Tensor<S>::zeros_like(d_rp);
    for (std::size_t i = 0; i < d_rp.size(); ++i) {
      d_f.v[i] = d_rp.v[i] * tape.gate_s.v[i];
      d_s.v[i] =
          d_rp.v[i] * (tape.f_out.v[i] - tape.carry.v[i]);
    }
    if (dcarry) {
      *dcarry = Tensor<S>::zeros_like(d_rp);
      for (std::size_t i = 0; i < d_rp.size(); ++i)
        dcarry->v[i] = d_rp.v[i] * (S(1) - tape.gate_s.v[i]);
    }
    Tensor<S> d_rv = f_.backward(tape.f_c, d_f);
    d_s = sigmoid_backward(tape.gate, d_s);
    d_rv.add(g_.backward(tape.g_c, d_s));

    Tensor<S> dt = enc_c4_.backward(tape.enc_c4, d_rv);
    dt = relu_backward(tape.enc_r3, dt);
    dt = enc_b3_.backward(tape.enc_b3, dt);
    dt = enc_c3_.backward(tape.enc_c3, dt);
    dt = relu_backward(tape.enc_r2, dt);
    dt = enc_b2_.backward(tape.enc_b2, dt);
    dt = enc_c2_.backward(tape.enc_c2, dt);
    dt = relu_backward(tape.enc_r1, dt);
    dt = enc_b1_.backward(tape.enc_b1, dt);
    return enc_c1_.backward(tape.enc_c1, dt);
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    auto absorb = [&out](std::vector<ParamRef<S>> v) {
      for (auto& p : v) out.push_back(p);
    };
    absorb(enc_c1_.params());
    absorb(enc_b1_.params());
    absorb(enc_c2_.params());
    absorb(enc_b2_.params());
    absorb(enc_c3_.params());
    absorb(enc_b3_.params());
    absorb(enc_c4_.params());
    absorb(f_.params());
    absorb(g_.params());
    for (auto& b : blocks_) absorb(b.params());
    for (auto& fc : act_fc_) absorb(fc.params());
    absorb(pred_c1_.params());
    absorb(pred_b1_.params());
    absorb(pred_c2_.params());
    absorb(pred_b2_.params());
    absorb(pred_c3_.params());
    absorb(pred_b3_.params());
    absorb(pred_c4_.params());
    return out;
  }

  std::vector<ParamRef<S>> buffers() {
    std::vector<ParamRef<S>> out;
    auto absorb = [&out](std::vector<ParamRef<S>> v) {
      for (auto& p : v) out.push_back(p);
    };
    absorb(enc_b1_.buffers());
    absorb(enc_b2_.buffers());
    absorb(enc_b3_.buffers());
    for (auto& b : blocks_) absorb(b.buffers());
    absorb(pred_b1_.buffers());
    absorb(pred_b2_.buffers());
    absorb(pred_b3_.buffers());
    return out;
  }

  void zero_grad() {
    for (auto& p : params())
      if (p.grad) std::fill(p.grad, p.grad + p.size, S(0));
  }

  int action_width() const { return awidth_; }
  int residual_depth() const { return depth_; }

 private:
  void check_input(const Tensor<S>& depth, const Tensor<S>& carry) const {
    if (depth.c != 1)
      throw std::logic_error("depth input " + depth.shape_str() +
                             " must have one channel");
    if (carry.n != depth.n || carry.h != depth.h || carry.w != depth.w ||
        carry.c != kChannels)
      throw std::logic_error("carry " + carry.shape_str() +
                             " does not match depth " + depth.shape_str());
  }

  int awidth_;
  int depth_;
  Conv2d<S> enc_c1_, enc_c2_, enc_c3_, enc_c4_;
  BatchNorm<S> enc_b1_, enc_b2_, enc_b3_;
  Conv2d<S> f_, g_;
  std::vector<ResidualBlock<S>> blocks_;
  std::vector<Dense<S>> act_fc_;
  CrossConv<S> cross_;
  Conv2d<S> pred_c1_, pred_c2_, pred_c3_, pred_c4_;
  BatchNorm<S> pred_b1_, pred_b2_, pred_b3_;
};

}  // namespace dpn
