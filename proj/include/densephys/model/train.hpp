#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "densephys/core/config.hpp"
#include "densephys/core/errors.hpp"
#include "densephys/core/rng.hpp"
#include "densephys/data/episode.hpp"
#include "densephys/model/net.hpp"
#include "densephys/nn/adam.hpp"

namespace dpn {

/// Mean-squared error over every element; when `grad` is non-null it
/// receives d(loss)/d(pred).
template <typename S>
double mse_loss(const Tensor<S>& pred, const Tensor<S>& gt,
                Tensor<S>* grad = nullptr) {
  if (pred.n != gt.n || pred.h != gt.h || pred.w != gt.w || pred.c != gt.c)
    throw std::logic_error("loss shapes differ: " + pred.shape_str() +
                           " vs " + gt.shape_str());
  const double scale = 1.0 / static_cast<double>(pred.size());
  double sum = 0.0;
  if (grad) *grad = Tensor<S>::zeros_like(pred);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.v[i]) - gt.v[i];
    sum += d * d;
    if (grad) grad->v[i] = static_cast<S>(2.0 * d * scale);
  }
  return sum * scale;
}

namespace detail {

template <typename S>
Tensor<S> depth_batch(const std::vector<const EpisodeData*>& eps, int t,
                      int grid) {
  Tensor<S> out(static_cast<int>(eps.size()), grid, grid, 1);
  const std::size_t pixels = static_cast<std::size_t>(grid) * grid;
  for (std::size_t n = 0; n < eps.size(); ++n) {
    const auto& src = t < static_cast<int>(eps[n]->steps.size())
                          ? eps[n]->steps[t].depth_before
                          : eps[n]->final_depth;
    for (std::size_t i = 0; i < pixels; ++i)
      out.v[n * pixels + i] = static_cast<S>(src[i]);
  }
  return out;
}

template <typename S>
Tensor<S> avec_batch(const std::vector<const EpisodeData*>& eps, int t,
                     int width) {
  Tensor<S> out(static_cast<int>(eps.size()), 1, 1, width);
  for (std::size_t n = 0; n < eps.size(); ++n)
    for (int i = 0; i < width; ++i)
      out.v[n * width + i] = static_cast<S>(eps[n]->steps[t].avec[i]);
  return out;
}

/// Flow files hold two planes (column then row displacement); the network
/// predicts the same two values as channels, so plane p maps to channel p.
template <typename S>
Tensor<S> flow_batch(const std::vector<const EpisodeData*>& eps, int t,
                     int grid) {
  Tensor<S> out(static_cast<int>(eps.size()), grid, grid, 2);
  const std::size_t pixels = static_cast<std::size_t>(grid) * grid;
  for (std::size_t n = 0; n < eps.size(); ++n) {
    const auto& src = eps[n]->steps[t].flow;
    for (std::size_t i = 0; i < pixels; ++i) {
      out.v[(n * pixels + i) * 2 + 0] = static_cast<S>(src[i]);
      out.v[(n * pixels + i) * 2 + 1] = static_cast<S>(src[pixels + i]);
    }
  }
  return out;
}

}  // namespace detail

/// Optimises a flow-prediction network over recorded episodes.  In the
/// default mode the carry is treated as data (no gradient crosses step
/// boundaries) and the optimiser steps once per interaction step; with
/// `cfg.bptt` the per-step losses of a batch are averaged, gradients flow
/// backwards through the carry chain, and the optimiser steps once per
/// batch.
template <typename S>
class Trainer {
 public:
  Trainer(DensePhysNet<S>& net, const RunConfig& cfg)
      : net_(net), cfg_(cfg),
        opt_(net.params(), cfg.lr0, cfg.beta1, cfg.beta2) {}

  /// One pass over the dataset; returns the mean per-step loss.
  double run_epoch(const std::vector<EpisodeData>& episodes, int epoch) {
    if (episodes.empty()) throw ConfigError("training set is empty");
    const int grid = static_cast<int>(episodes.front().grid);
    const int steps = static_cast<int>(episodes.front().steps.size());
    for (const auto& ep : episodes)
      if (static_cast<int>(ep.grid) != grid ||
          static_cast<int>(ep.steps.size()) != steps ||
          static_cast<int>(ep.action_width) != cfg_.action_width)
        throw FormatError("episodes disagree on grid, length, or width");

    opt_.set_lr(cfg_.lr0 * std::pow(cfg_.lr_decay, epoch));
    auto rng = seeded_rng(cfg_.seed, "train/epoch/" + std::to_string(epoch));
    std::vector<std::size_t> order(episodes.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);

    double loss_sum = 0.0;
    int loss_count = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg_.batch) {
      std::vector<const EpisodeData*> batch;
      for (std::size_t i = start;
           i < order.size() && i < start + cfg_.batch; ++i)
        batch.push_back(&episodes[order[i]]);
      const double batch_loss =
          cfg_.bptt ? bptt_batch(batch, grid, steps)
                    : detached_batch(batch, grid, steps);
      loss_sum += batch_loss;
      loss_count += 1;
    }
    return loss_sum / loss_count;
  }

  Adam<S>& optimizer() { return opt_; }

 private:
  double detached_batch(const std::vector<const EpisodeData*>& batch,
                        int grid, int steps) {
    const int b = static_cast<int>(batch.size());
    Tensor<S> carry = net_.zero_carry(b, grid);
    double sum = 0.0;
    for (int t = 0; t < steps; ++t) {
      const Tensor<S> depth = detail::depth_batch<S>(batch, t, grid);
      const Tensor<S> avec =
          detail::avec_batch<S>(batch, t, cfg_.action_width);
      const Tensor<S> gt = detail::flow_batch<S>(batch, t, grid);
      typename DensePhysNet<S>::StepTape tape;
      auto out = net_.forward_step(depth, avec, carry, &tape, true);
      Tensor<S> dflow;
      const double loss = mse_loss(out.flow, gt, &dflow);
      if (!std::isfinite(loss))
        throw DivergenceError("loss is not finite");
      opt_.zero_grad();
      net_.backward_step(tape, dflow, nullptr, nullptr);
      opt_.step();
      carry = std::move(out.ra);
      sum += loss;
    }
    return sum / steps;
  }

  double bptt_batch(const std::vector<const EpisodeData*>& batch, int grid,
                    int steps) {
    const int b = static_cast<int>(batch.size());
    std::vector<typename DensePhysNet<S>::StepTape> tapes(steps);
    std::vector<Tensor<S>> dflows(steps);
    Tensor<S> carry = net_.zero_carry(b, grid);
    double total = 0.0;
    for (int t = 0; t < steps; ++t) {
      const Tensor<S> depth = detail::depth_batch<S>(batch, t, grid);
      const Tensor<S> avec =
          detail::avec_batch<S>(batch, t, cfg_.action_width);
      const Tensor<S> gt = detail::flow_batch<S>(batch, t, grid);
      auto out = net_.forward_step(depth, avec, carry, &tapes[t], true);
      const double loss = mse_loss(out.flow, gt, &dflows[t]);
      if (!std::isfinite(loss))
        throw DivergenceError("loss is not finite");
      const S inv = S(1) / static_cast<S>(steps);
      for (auto& v : dflows[t].v) v *= inv;
      total += loss / steps;
      carry = std::move(out.ra);
    }
    opt_.zero_grad();
    Tensor<S> dcarry;
    for (int t = steps - 1; t >= 0; --t) {
      Tensor<S> dc_prev;
      net_.backward_step(tapes[t], dflows[t],
                         t + 1 < steps ? &dcarry : nullptr,
                         t > 0 ? &dc_prev : nullptr);
      dcarry = std::move(dc_prev);
    }
    opt_.step();
    return total;
  }

  DensePhysNet<S>& net_;
  RunConfig cfg_;
  Adam<S> opt_;
};

}  // namespace dpn
