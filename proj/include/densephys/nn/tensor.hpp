#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpn {

template <typename S>
using MatrixRM =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

/// Dense 4-D array in NHWC layout (channel fastest).  Vectors and matrices
/// are carried as [N, 1, 1, C].
template <typename S>
struct Tensor {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<S> v;

  Tensor() = default;
  Tensor(int n_, int h_, int w_, int c_)
      : n(n_), h(h_), w(w_), c(c_),
        v(static_cast<std::size_t>(n_) * h_ * w_ * c_, S(0)) {}

  static Tensor zeros(int n_, int h_, int w_, int c_) {
    return Tensor(n_, h_, w_, c_);
  }
  static Tensor zeros_like(const Tensor& o) {
    return Tensor(o.n, o.h, o.w, o.c);
  }

  std::size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const {
    return n == o.n && h == o.h && w == o.w && c == o.c;
  }
  std::string shape_str() const {
    return "[" + std::to_string(n) + "," + std::to_string(h) + "," +
           std::to_string(w) + "," + std::to_string(c) + "]";
  }

  std::size_t index(int in, int ir, int ic, int ich) const {
    return ((static_cast<std::size_t>(in) * h + ir) * w + ic) * c + ich;
  }
  S& at(int in, int ir, int ic, int ich) { return v[index(in, ir, ic, ich)]; }
  S at(int in, int ir, int ic, int ich) const {
    return v[index(in, ir, ic, ich)];
  }

  S* data() { return v.data(); }
  const S* data() const { return v.data(); }

  /// View as a (n*h*w) x c row-major matrix.
  Eigen::Map<MatrixRM<S>> rows() {
    return {v.data(), static_cast<Eigen::Index>(n) * h * w, c};
  }
  Eigen::Map<const MatrixRM<S>> rows() const {
    return {v.data(), static_cast<Eigen::Index>(n) * h * w, c};
  }

  /// View as an arbitrary row-major matrix whose element count matches.
  Eigen::Map<MatrixRM<S>> as_matrix(Eigen::Index r, Eigen::Index cols) {
    if (static_cast<std::size_t>(r) * cols != size())
      throw std::logic_error("tensor reshape does not preserve size");
    return {v.data(), r, cols};
  }
  Eigen::Map<const MatrixRM<S>> as_matrix(Eigen::Index r,
                                          Eigen::Index cols) const {
    if (static_cast<std::size_t>(r) * cols != size())
      throw std::logic_error("tensor reshape does not preserve size");
    return {v.data(), r, cols};
  }

  void fill(S value) { std::fill(v.begin(), v.end(), value); }

  void add(const Tensor& o) {
    if (!same_shape(o))
      throw std::logic_error("tensor add shape mismatch " + shape_str() +
                             " vs " + o.shape_str());
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> a(
        v.data(), static_cast<Eigen::Index>(size()));
    Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> b(
        o.v.data(), static_cast<Eigen::Index>(o.size()));
    a += b;
  }
};

/// Handle to one parameter (or gradient) buffer of a layer; models expose a
/// flat list of these for the optimizer and the checkpoint writer.
template <typename S>
struct ParamRef {
  std::string name;
  S* value = nullptr;
  S* grad = nullptr;
  std::size_t size = 0;
  std::vector<int> shape;
};

}  // namespace dpn
