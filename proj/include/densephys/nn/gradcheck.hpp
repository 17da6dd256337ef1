#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "densephys/nn/tensor.hpp"

namespace dpn {

/// Central-difference derivative of `loss` with respect to buffer element
/// i, perturbing the buffer in place and restoring it afterwards.
template <typename S>
double numeric_grad(S* buffer, std::size_t i,
                    const std::function<double()>& loss, double h) {
  const S saved = buffer[i];
  buffer[i] = static_cast<S>(saved + h);
  const double up = loss();
  buffer[i] = static_cast<S>(saved - h);
  const double down = loss();
  buffer[i] = saved;
  return (up - down) / (2.0 * h);
}

/// Relative disagreement between an analytic and a numeric derivative,
/// bounded below by an absolute scale of 1 so near-zero pairs compare
/// absolutely.
inline double grad_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1.0, std::abs(analytic) + std::abs(numeric));
}

/// Worst relative error over the elements of a buffer whose analytic
/// gradient is already computed and stored alongside it.  `stride` samples
/// every stride-th element so large tensors stay affordable to check while
/// still being probed across their whole extent.
template <typename S>
double max_grad_error(S* values, const S* grads, std::size_t size,
                      const std::function<double()>& loss, double h,
                      std::size_t stride = 1) {
  double worst = 0.0;
  for (std::size_t i = 0; i < size; i += stride) {
    const double numeric = numeric_grad(values, i, loss, h);
    worst = std::max(worst,
                     grad_rel_error(static_cast<double>(grads[i]), numeric));
  }
  return worst;
}

}  // namespace dpn
