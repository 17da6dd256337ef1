#pragma once

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "densephys/core/rng.hpp"
#include "densephys/nn/tensor.hpp"

namespace dpn {

namespace detail {

/// Shared im2col scratch, grown on demand; one set per thread so data
/// generation threads and training never alias.
template <typename S>
inline std::vector<S>& conv_scratch(int which) {
  thread_local std::vector<S> bufs[2];
  return bufs[which];
}

}  // namespace detail

/// Same-padding stride-1 convolution over NHWC tensors, lowered to a GEMM
/// through im2col.  Weights are stored as a (k*k*in_c) x out_c matrix so the
/// forward pass is cols * W.
template <typename S>
class Conv2d {
 public:
  struct Cache {
    Tensor<S> x;
  };

  Conv2d(std::string name, int in_c, int out_c, int k)
      : name_(std::move(name)), in_c_(in_c), out_c_(out_c), k_(k),
        pad_(k / 2), W(k * k * in_c, out_c), b(out_c), gW(k * k * in_c, out_c),
        gb(out_c) {
    if (k % 2 == 0) throw std::logic_error("conv kernel must be odd");
    W.setZero();
    b.setZero();
    gW.setZero();
    gb.setZero();
  }

  void init(Xoshiro256ss& rng, double scale = 2.0) {
    const double std = std::sqrt(scale / (k_ * k_ * in_c_));
    for (Eigen::Index i = 0; i < W.size(); ++i)
      W.data()[i] = static_cast<S>(rng.normal() * std);
    b.setZero();
  }

  Tensor<S> forward(const Tensor<S>& x, Cache* cache) const {
    if (x.c != in_c_)
      throw std::logic_error(name_ + ": input has " + std::to_string(x.c) +
                             " channels, expected " + std::to_string(in_c_));
    if (cache) cache->x = x;
    auto& cols = detail::conv_scratch<S>(0);
    im2col(x, cols);
    Tensor<S> y(x.n, x.h, x.w, out_c_);
    Eigen::Map<const MatrixRM<S>> cols_m(
        cols.data(), static_cast<Eigen::Index>(x.n) * x.h * x.w,
        k_ * k_ * in_c_);
    y.rows().noalias() = cols_m * W;
    y.rows().rowwise() += b;
    return y;
  }

  Tensor<S> backward(const Cache& cache, const Tensor<S>& dy) {
    const Tensor<S>& x = cache.x;
    auto& cols = detail::conv_scratch<S>(0);
    im2col(x, cols);
    Eigen::Map<const MatrixRM<S>> cols_m(
        cols.data(), static_cast<Eigen::Index>(x.n) * x.h * x.w,
        k_ * k_ * in_c_);
    gW.noalias() += cols_m.transpose() * dy.rows();
    gb += dy.rows().colwise().sum();

    auto& dcols = detail::conv_scratch<S>(1);
    dcols.resize(cols.size());
    Eigen::Map<MatrixRM<S>> dcols_m(
        dcols.data(), static_cast<Eigen::Index>(x.n) * x.h * x.w,
        k_ * k_ * in_c_);
    dcols_m.noalias() = dy.rows() * W.transpose();
    Tensor<S> dx(x.n, x.h, x.w, x.c);
    col2im(dcols, dx);
    return dx;
  }

  void zero_grad() {
    gW.setZero();
    gb.setZero();
  }

  std::vector<ParamRef<S>> params() {
    return {{name_ + ".W", W.data(), gW.data(),
             static_cast<std::size_t>(W.size()),
             {k_, k_, in_c_, out_c_}},
            {name_ + ".b", b.data(), gb.data(),
             static_cast<std::size_t>(b.size()),
             {out_c_}}};
  }

  const std::string& name() const { return name_; }
  int kernel() const { return k_; }

  MatrixRM<S> W;
  RowVec<S> b;
  MatrixRM<S> gW;
  RowVec<S> gb;

 private:
  void im2col(const Tensor<S>& x, std::vector<S>& cols) const {
    const int kk_c = k_ * k_ * in_c_;
    cols.assign(static_cast<std::size_t>(x.n) * x.h * x.w * kk_c, S(0));
    for (int n = 0; n < x.n; ++n) {
      for (int ky = 0; ky < k_; ++ky) {
        const int r_lo = std::max(0, pad_ - ky);
        const int r_hi = std::min(x.h, x.h + pad_ - ky);
        for (int kx = 0; kx < k_; ++kx) {
          const int c_lo = std::max(0, pad_ - kx);
          const int c_hi = std::min(x.w, x.w + pad_ - kx);
          const std::size_t col_off =
              static_cast<std::size_t>(ky * k_ + kx) * in_c_;
          for (int r = r_lo; r < r_hi; ++r) {
            const int r_src = r + ky - pad_;
            const S* src = &x.v[x.index(n, r_src, c_lo + kx - pad_, 0)];
            S* dst_row = &cols[(static_cast<std::size_t>(n) * x.h * x.w +
                                static_cast<std::size_t>(r) * x.w + c_lo) *
                                   kk_c +
                               col_off];
            for (int c = c_lo; c < c_hi; ++c) {
              std::memcpy(dst_row, src, sizeof(S) * in_c_);
              src += in_c_;
              dst_row += kk_c;
            }
          }
        }
      }
    }
  }

  void col2im(const std::vector<S>& cols, Tensor<S>& dx) const {
    const int kk_c = k_ * k_ * in_c_;
    for (int n = 0; n < dx.n; ++n) {
      for (int ky = 0; ky < k_; ++ky) {
        const int r_lo = std::max(0, pad_ - ky);
        const int r_hi = std::min(dx.h, dx.h + pad_ - ky);
        for (int kx = 0; kx < k_; ++kx) {
          const int c_lo = std::max(0, pad_ - kx);
          const int c_hi = std::min(dx.w, dx.w + pad_ - kx);
          const std::size_t col_off =
              static_cast<std::size_t>(ky * k_ + kx) * in_c_;
          for (int r = r_lo; r < r_hi; ++r) {
            const int r_src = r + ky - pad_;
            S* dst = &dx.v[dx.index(n, r_src, c_lo + kx - pad_, 0)];
            const S* src_row =
                &cols[(static_cast<std::size_t>(n) * dx.h * dx.w +
                       static_cast<std::size_t>(r) * dx.w + c_lo) *
                          kk_c +
                      col_off];
            for (int c = c_lo; c < c_hi; ++c) {
              for (int ch = 0; ch < in_c_; ++ch) dst[ch] += src_row[ch];
              dst += in_c_;
              src_row += kk_c;
            }
          }
        }
      }
    }
  }

  std::string name_;
  int in_c_, out_c_, k_, pad_;
};

/// Fully connected layer over [N, 1, 1, K] tensors.
template <typename S>
class Dense {
 public:
  struct Cache {
    Tensor<S> x;
  };

  Dense(std::string name, int in_k, int out_k)
      : name_(std::move(name)), in_k_(in_k), out_k_(out_k), W(in_k, out_k),
        b(out_k), gW(in_k, out_k), gb(out_k) {
    W.setZero();
    b.setZero();
    gW.setZero();
    gb.setZero();
  }

  void init(Xoshiro256ss& rng, double scale = 2.0) {
    const double std = std::sqrt(scale / in_k_);
    for (Eigen::Index i = 0; i < W.size(); ++i)
      W.data()[i] = static_cast<S>(rng.normal() * std);
    b.setZero();
  }

  Tensor<S> forward(const Tensor<S>& x, Cache* cache) const {
    if (x.c != in_k_ || x.h != 1 || x.w != 1)
      throw std::logic_error(name_ + ": expected [N,1,1," +
                             std::to_string(in_k_) + "], got " +
                             x.shape_str());
    if (cache) cache->x = x;
    Tensor<S> y(x.n, 1, 1, out_k_);
    y.rows().noalias() = x.rows() * W;
    y.rows().rowwise() += b;
    return y;
  }

  Tensor<S> backward(const Cache& cache, const Tensor<S>& dy) {
    gW.noalias() += cache.x.rows().transpose() * dy.rows();
    gb += dy.rows().colwise().sum();
    Tensor<S> dx = Tensor<S>::zeros_like(cache.x);
    dx.rows().noalias() = dy.rows() * W.transpose();
    return dx;
  }

  void zero_grad() {
    gW.setZero();
    gb.setZero();
  }

  std::vector<ParamRef<S>> params() {
    return {{name_ + ".W", W.data(), gW.data(),
             static_cast<std::size_t>(W.size()),
             {in_k_, out_k_}},
            {name_ + ".b", b.data(), gb.data(),
             static_cast<std::size_t>(b.size()),
             {out_k_}}};
  }

  MatrixRM<S> W;
  RowVec<S> b;
  MatrixRM<S> gW;
  RowVec<S> gb;

 private:
  std::string name_;
  int in_k_, out_k_;
};

/// Per-channel batch normalisation over NHWC tensors.  Training uses batch
/// statistics and maintains running averages (momentum 0.1, biased
/// variance); evaluation uses the running averages.
template <typename S>
class BatchNorm {
 public:
  struct Cache {
    Tensor<S> xhat;
    RowVec<S> invstd;
  };

  BatchNorm(std::string name, int channels)
      : name_(std::move(name)), c_(channels), gamma(channels), beta(channels),
        running_mean(channels), running_var(channels), ggamma(channels),
        gbeta(channels) {
    gamma.setOnes();
    beta.setZero();
    running_mean.setZero();
    running_var.setOnes();
    ggamma.setZero();
    gbeta.setZero();
  }

  /// `train` selects batch statistics (else running statistics);
  /// `update_stats` controls whether batch statistics are folded into the
  /// running buffers, so inference can normalise with batch statistics
  /// without mutating the model.
  Tensor<S> forward(const Tensor<S>& x, Cache* cache, bool train,
                    bool update_stats = true) {
    if (x.c != c_)
      throw std::logic_error(name_ + ": input has " + std::to_string(x.c) +
                             " channels, expected " + std::to_string(c_));
    Tensor<S> y = Tensor<S>::zeros_like(x);
    auto xm = x.rows();
    auto ym = y.rows();
    const Eigen::Index rows = xm.rows();
    if (train) {
      RowVec<S> mean = xm.colwise().mean();
      RowVec<S> var =
          (xm.rowwise() - mean).array().square().colwise().mean();
      RowVec<S> invstd =
          (var.array() + S(kEps)).sqrt().inverse().matrix();
      if (update_stats) {
        running_mean = (S(1) - S(kMomentum)) * running_mean +
                       S(kMomentum) * mean;
        running_var =
            (S(1) - S(kMomentum)) * running_var + S(kMomentum) * var;
      }
      Tensor<S> xhat = Tensor<S>::zeros_like(x);
      xhat.rows() =
          ((xm.rowwise() - mean).array().rowwise() * invstd.array());
      ym = (xhat.rows().array().rowwise() * gamma.array()).rowwise() +
           beta.array();
      if (cache) {
        cache->xhat = std::move(xhat);
        cache->invstd = std::move(invstd);
      }
    } else {
      RowVec<S> invstd =
          (running_var.array() + S(kEps)).sqrt().inverse().matrix();
      ym = (((xm.rowwise() - running_mean).array().rowwise() *
             invstd.array())
                .rowwise() *
            gamma.array())
               .rowwise() +
           beta.array();
    }
    (void)rows;
    return y;
  }

  Tensor<S> backward(const Cache& cache, const Tensor<S>& dy) {
    const auto xhat = cache.xhat.rows();
    const auto dym = dy.rows();
    const S m = static_cast<S>(dym.rows());
    ggamma += (dym.array() * xhat.array()).colwise().sum().matrix();
    gbeta += dym.colwise().sum();

    MatrixRM<S> dxhat = dym.array().rowwise() * gamma.array();
    RowVec<S> sum_dxhat = dxhat.colwise().sum();
    RowVec<S> sum_dxhat_xhat =
        (dxhat.array() * xhat.array()).colwise().sum().matrix();
    Tensor<S> dx = Tensor<S>::zeros_like(cache.xhat);
    dx.rows() = ((dxhat * m).array().rowwise() - sum_dxhat.array());
    dx.rows().array() -= xhat.array().rowwise() * sum_dxhat_xhat.array();
    dx.rows().array().rowwise() *= (cache.invstd.array() / m);
    return dx;
  }

  void zero_grad() {
    ggamma.setZero();
    gbeta.setZero();
  }

  std::vector<ParamRef<S>> params() {
    return {{name_ + ".gamma", gamma.data(), ggamma.data(),
             static_cast<std::size_t>(gamma.size()),
             {c_}},
            {name_ + ".beta", beta.data(), gbeta.data(),
             static_cast<std::size_t>(beta.size()),
             {c_}}};
  }

  /// Running statistics ride along in checkpoints but take no gradient.
  std::vector<ParamRef<S>> buffers() {
    return {{name_ + ".running_mean", running_mean.data(), nullptr,
             static_cast<std::size_t>(running_mean.size()),
             {c_}},
            {name_ + ".running_var", running_var.data(), nullptr,
             static_cast<std::size_t>(running_var.size()),
             {c_}}};
  }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  RowVec<S> gamma, beta;
  RowVec<S> running_mean, running_var;
  RowVec<S> ggamma, gbeta;

 private:
  std::string name_;
  int c_;
};

template <typename S>
struct ReluCache {
  std::vector<std::uint8_t> mask;
};

template <typename S>
Tensor<S> relu_forward(const Tensor<S>& x, ReluCache<S>* cache) {
  Tensor<S> y = x;
  if (cache) cache->mask.assign(x.size(), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y.v[i] > S(0)) {
      if (cache) cache->mask[i] = 1;
    } else {
      y.v[i] = S(0);
    }
  }
  return y;
}

template <typename S>
Tensor<S> relu_backward(const ReluCache<S>& cache, const Tensor<S>& dy) {
  Tensor<S> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!cache.mask[i]) dx.v[i] = S(0);
  return dx;
}

template <typename S>
struct SigmoidCache {
  Tensor<S> y;
};

template <typename S>
Tensor<S> sigmoid_forward(const Tensor<S>& x, SigmoidCache<S>* cache) {
  Tensor<S> y = x;
  for (auto& v : y.v) v = S(1) / (S(1) + std::exp(-v));
  if (cache) cache->y = y;
  return y;
}

template <typename S>
Tensor<S> sigmoid_backward(const SigmoidCache<S>& cache, const Tensor<S>& dy) {
  Tensor<S> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    dx.v[i] *= cache.y.v[i] * (S(1) - cache.y.v[i]);
  return dx;
}

/// Channel-wise convolution of each sample's feature map with that sample's
/// own kernel stack (no parameters of its own; the kernels are activations
/// produced by the action encoder).  Kernels are [N, k, k, C]; channel ch of
/// sample n is convolved with kernel (n, :, :, ch), same padding.
template <typename S>
class CrossConv {
 public:
  struct Cache {
    Tensor<S> x;
    Tensor<S> kernels;
  };

  explicit CrossConv(int k = 5) : k_(k), pad_(k / 2) {
    if (k % 2 == 0) throw std::logic_error("cross-conv kernel must be odd");
  }

  Tensor<S> forward(const Tensor<S>& x, const Tensor<S>& kernels,
                    Cache* cache) const {
    check_shapes(x, kernels);
    if (cache) {
      cache->x = x;
      cache->kernels = kernels;
    }
    Tensor<S> y = Tensor<S>::zeros_like(x);
    for (int n = 0; n < x.n; ++n) {
      for (int ky = 0; ky < k_; ++ky) {
        const int r_lo = std::max(0, pad_ - ky);
        const int r_hi = std::min(x.h, x.h + pad_ - ky);
        for (int kx = 0; kx < k_; ++kx) {
          const int c_lo = std::max(0, pad_ - kx);
          const int c_hi = std::min(x.w, x.w + pad_ - kx);
          if (c_lo >= c_hi) continue;
          Eigen::Map<const RowVec<S>> kvec(&kernels.v[kernels.index(n, ky, kx, 0)],
                                           x.c);
          for (int r = r_lo; r < r_hi; ++r) {
            const Eigen::Index len = c_hi - c_lo;
            Eigen::Map<const MatrixRM<S>> xs(
                &x.v[x.index(n, r + ky - pad_, c_lo + kx - pad_, 0)], len,
                x.c);
            Eigen::Map<MatrixRM<S>> ys(&y.v[y.index(n, r, c_lo, 0)], len,
                                       x.c);
            ys.noalias() += xs * kvec.asDiagonal();
          }
        }
      }
    }
    return y;
  }

  void backward(const Cache& cache, const Tensor<S>& dy, Tensor<S>* dx,
                Tensor<S>* dkernels) const {
    const Tensor<S>& x = cache.x;
    const Tensor<S>& kernels = cache.kernels;
    if (dx) *dx = Tensor<S>::zeros_like(x);
    if (dkernels) *dkernels = Tensor<S>::zeros_like(kernels);
    for (int n = 0; n < x.n; ++n) {
      for (int ky = 0; ky < k_; ++ky) {
        const int r_lo = std::max(0, pad_ - ky);
        const int r_hi = std::min(x.h, x.h + pad_ - ky);
        for (int kx = 0; kx < k_; ++kx) {
          const int c_lo = std::max(0, pad_ - kx);
          const int c_hi = std::min(x.w, x.w + pad_ - kx);
          if (c_lo >= c_hi) continue;
          Eigen::Map<const RowVec<S>> kvec(
              &kernels.v[kernels.index(n, ky, kx, 0)], x.c);
          for (int r = r_lo; r < r_hi; ++r) {
            const Eigen::Index len = c_hi - c_lo;
            const std::size_t x_off =
                x.index(n, r + ky - pad_, c_lo + kx - pad_, 0);
            const std::size_t y_off = x.index(n, r, c_lo, 0);
            Eigen::Map<const MatrixRM<S>> dys(&dy.v[y_off], len, x.c);
            if (dx) {
              Eigen::Map<MatrixRM<S>> dxs(&dx->v[x_off], len, x.c);
              dxs.noalias() += dys * kvec.asDiagonal();
            }
            if (dkernels) {
              const S* xp = &x.v[x_off];
              const S* dyp = &dy.v[y_off];
              S* dkp = &dkernels->v[dkernels->index(n, ky, kx, 0)];
              for (Eigen::Index row = 0; row < len; ++row)
                for (int ch = 0; ch < x.c; ++ch)
                  dkp[ch] += dyp[row * x.c + ch] * xp[row * x.c + ch];
            }
          }
        }
      }
    }
  }

 private:
  void check_shapes(const Tensor<S>& x, const Tensor<S>& kernels) const {
    if (kernels.n != x.n || kernels.h != k_ || kernels.w != k_ ||
        kernels.c != x.c)
      throw std::logic_error("cross-conv kernels " + kernels.shape_str() +
                             " do not match input " + x.shape_str());
  }

  int k_, pad_;
};

/// Pre-activation residual block: x + Conv(ReLU(BN(Conv(ReLU(BN(x)))))).
/// With zero conv weights the block is an exact identity.
template <typename S>
class ResidualBlock {
 public:
  struct Cache {
    typename BatchNorm<S>::Cache bn1, bn2;
    ReluCache<S> relu1, relu2;
    typename Conv2d<S>::Cache conv1, conv2;
  };

  ResidualBlock(const std::string& name, int channels, int k = 3)
      : bn1_(name + ".bn1", channels), conv1_(name + ".conv1", channels,
                                              channels, k),
        bn2_(name + ".bn2", channels), conv2_(name + ".conv2", channels,
                                              channels, k) {}

  void init(Xoshiro256ss& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
  }

  Tensor<S> forward(const Tensor<S>& x, Cache* cache, bool train,
                    bool update_stats = true) {
    Tensor<S> t =
        bn1_.forward(x, cache ? &cache->bn1 : nullptr, train, update_stats);
    t = relu_forward(t, cache ? &cache->relu1 : nullptr);
    t = conv1_.forward(t, cache ? &cache->conv1 : nullptr);
    t = bn2_.forward(t, cache ? &cache->bn2 : nullptr, train, update_stats);
    t = relu_forward(t, cache ? &cache->relu2 : nullptr);
    t = conv2_.forward(t, cache ? &cache->conv2 : nullptr);
    t.add(x);
    return t;
  }

  Tensor<S> backward(const Cache& cache, const Tensor<S>& dy) {
    Tensor<S> d = conv2_.backward(cache.conv2, dy);
    d = relu_backward(cache.relu2, d);
    d = bn2_.backward(cache.bn2, d);
    d = conv1_.backward(cache.conv1, d);
    d = relu_backward(cache.relu1, d);
    d = bn1_.backward(cache.bn1, d);
    d.add(dy);
    return d;
  }

  void zero_grad() {
    bn1_.zero_grad();
    conv1_.zero_grad();
    bn2_.zero_grad();
    conv2_.zero_grad();
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    for (auto* layer : {&bn1_, &bn2_})
      for (auto& p : layer->params()) out.push_back(p);
    for (auto* layer : {&conv1_, &conv2_})
      for (auto& p : layer->params()) out.push_back(p);
    return out;
  }

  std::vector<ParamRef<S>> buffers() {
    std::vector<ParamRef<S>> out;
    for (auto* layer : {&bn1_, &bn2_})
      for (auto& p : layer->buffers()) out.push_back(p);
    return out;
  }

  BatchNorm<S> bn1_;
  Conv2d<S> conv1_;
  BatchNorm<S> bn2_;
  Conv2d<S> conv2_;
};

}  // namespace dpn
