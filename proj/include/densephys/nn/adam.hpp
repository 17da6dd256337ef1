#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "densephys/core/errors.hpp"
#include "densephys/nn/tensor.hpp"

namespace dpn {

/// Adam with bias correction over a flat parameter list.  The caller owns
/// the parameter and gradient buffers; step() reads grads and updates
/// values in place.
template <typename S>
class Adam {
 public:
  Adam(std::vector<ParamRef<S>> params, double lr, double beta1,
       double beta2, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
        eps_(eps) {
    std::size_t total = 0;
    for (const auto& p : params_) total += p.size;
    m_.assign(total, S(0));
    v_.assign(total, S(0));
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    std::size_t off = 0;
    for (const auto& p : params_) {
      for (std::size_t i = 0; i < p.size; ++i) {
        const double g = static_cast<double>(p.grad[i]);
        if (!std::isfinite(g))
          throw DivergenceError("non-finite gradient in " + p.name);
        const double m = beta1_ * m_[off + i] + (1.0 - beta1_) * g;
        const double v = beta2_ * v_[off + i] + (1.0 - beta2_) * g * g;
        m_[off + i] = static_cast<S>(m);
        v_[off + i] = static_cast<S>(v);
        const double update =
            lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
        p.value[i] -= static_cast<S>(update);
      }
      off += p.size;
    }
  }

  void zero_grad() {
    for (const auto& p : params_)
      std::fill(p.grad, p.grad + p.size, S(0));
  }

  long steps_taken() const { return t_; }

 private:
  std::vector<ParamRef<S>> params_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<S> m_, v_;
  long t_ = 0;
};

}  // namespace dpn
