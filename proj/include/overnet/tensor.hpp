#pragma once

#include <cstddef>
#include <vector>

#include "overnet/common.hpp"

namespace overnet {

// Dense NCHW tensor, row-major with W fastest. The one data layout used
// everywhere: images, activations, weights (O=n, I=c, kh=h, kw=w).
template <typename T>
struct Tensor4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_)
      : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, T(0)) {}

  std::size_t size() const { return n * c * h * w; }

  T& at(std::size_t in, std::size_t ic, std::size_t iy, std::size_t ix) {
    return data[((in * c + ic) * h + iy) * w + ix];
  }
  const T& at(std::size_t in, std::size_t ic, std::size_t iy,
              std::size_t ix) const {
    return data[((in * c + ic) * h + iy) * w + ix];
  }

  // Pointer to the start of one HxW plane.
  T* plane(std::size_t in, std::size_t ic) {
    return data.data() + (in * c + ic) * h * w;
  }
  const T* plane(std::size_t in, std::size_t ic) const {
    return data.data() + (in * c + ic) * h * w;
  }

  void fill(T v) {
    for (auto& x : data) x = v;
  }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n, c, h, w);
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

}  // namespace overnet
