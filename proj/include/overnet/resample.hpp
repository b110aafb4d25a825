#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <tuple>
#include <vector>

#include "overnet/common.hpp"
#include "overnet/tensor.hpp"

namespace overnet {

enum class ResampleKernel { Cubic, Linear };

namespace detail {

// Cubic convolution kernel with a = -0.5. Support 2.
inline double cubic_kernel(double x) {
  x = std::fabs(x);
  if (x <= 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
  if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
  return 0.0;
}

// Triangle kernel. Support 1.
inline double linear_kernel(double x) {
  x = std::fabs(x);
  return x < 1.0 ? 1.0 - x : 0.0;
}

inline double kernel_support(ResampleKernel k) {
  return k == ResampleKernel::Cubic ? 2.0 : 1.0;
}

inline double kernel_eval(ResampleKernel k, double x) {
  return k == ResampleKernel::Cubic ? cubic_kernel(x) : linear_kernel(x);
}

}  // namespace detail

// Precomputed 1-D contributions: output sample i is the dot product of
// weights[i*taps .. i*taps+taps) with input samples starts[i] .. starts[i]+taps).
// Out-of-range taps are folded into the nearest edge sample (replicate
// boundary), so every stored index is in range and rows stay contiguous.
// Weights are built and stored in double; each row sums to exactly the
// normalized 1 within rounding.
struct ResampleTable {
  std::size_t in = 0, out = 0, taps = 0;
  std::vector<std::size_t> starts;
  std::vector<double> weights;
};

namespace detail {

inline std::shared_ptr<const ResampleTable> build_table(std::size_t in,
                                                        std::size_t out,
                                                        ResampleKernel kernel) {
  if (in == 0 || out == 0) throw UsageError("resample: empty output size");
  auto tab = std::make_shared<ResampleTable>();
  tab->in = in;
  tab->out = out;

  // Stretch the kernel when minifying so it acts as a low-pass filter.
  const double stretch =
      std::max(1.0, static_cast<double>(in) / static_cast<double>(out));
  const double support = kernel_support(kernel) * stretch;
  const std::size_t max_taps =
      std::min(in, static_cast<std::size_t>(std::ceil(support * 2.0)) + 1);
  tab->taps = max_taps;
  tab->starts.assign(out, 0);
  tab->weights.assign(out * max_taps, 0.0);

  std::vector<double> folded(in, 0.0);
  for (std::size_t i = 0; i < out; ++i) {
    // Half-pixel centers: output sample i sits at input coordinate u.
    const double u = (static_cast<double>(i) + 0.5) *
                         (static_cast<double>(in) / static_cast<double>(out)) -
                     0.5;
    const long jmin = static_cast<long>(std::ceil(u - support));
    const long jmax = static_cast<long>(std::floor(u + support));

    const long lo = std::clamp<long>(jmin, 0, static_cast<long>(in) - 1);
    const long hi = std::clamp<long>(jmax, 0, static_cast<long>(in) - 1);
    for (long j = lo; j <= hi; ++j) folded[static_cast<std::size_t>(j)] = 0.0;

    double sum = 0.0;
    for (long j = jmin; j <= jmax; ++j) {
      const double wgt =
          kernel_eval(kernel, (static_cast<double>(j) - u) / stretch);
      sum += wgt;
      const long jc = std::clamp<long>(j, 0, static_cast<long>(in) - 1);
      folded[static_cast<std::size_t>(jc)] += wgt;
    }
    if (sum <= 0.0) throw NumericError("resample: degenerate filter row");

    std::size_t start = static_cast<std::size_t>(lo);
    const std::size_t span = static_cast<std::size_t>(hi - lo) + 1;
    // Keep the stored window inside the input so reads never clamp again.
    if (start + max_taps > in) start = in - std::min(in, max_taps);
    tab->starts[i] = start;
    for (std::size_t t = 0; t < span && start + t < in; ++t) {
      // span <= max_taps by construction; extra slots stay zero.
      tab->weights[i * max_taps + (static_cast<std::size_t>(lo) - start) + t] =
          folded[static_cast<std::size_t>(lo) + t] / sum;
    }
  }
  return tab;
}

inline std::shared_ptr<const ResampleTable> get_table(std::size_t in,
                                                      std::size_t out,
                                                      ResampleKernel kernel) {
  using Key = std::tuple<std::size_t, std::size_t, int>;
  static std::map<Key, std::shared_ptr<const ResampleTable>> cache;
  const Key key{in, out, static_cast<int>(kernel)};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto tab = build_table(in, out, kernel);
  cache.emplace(key, tab);
  return tab;
}

}  // namespace detail

// Resize one H x W plane to oh x ow. Separable: width pass, then height pass.
// Accumulation is in double regardless of T.
template <typename T>
void resize_plane(const T* src, std::size_t h, std::size_t w, T* dst,
                  std::size_t oh, std::size_t ow, ResampleKernel kernel) {
  const auto tw = detail::get_table(w, ow, kernel);
  const auto th = detail::get_table(h, oh, kernel);

  // Width pass into a double scratch of shape h x ow.
  std::vector<double> mid(h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    const T* row = src + y * w;
    for (std::size_t x = 0; x < ow; ++x) {
      const double* wr = tw->weights.data() + x * tw->taps;
      const T* base = row + tw->starts[x];
      double acc = 0.0;
      for (std::size_t t = 0; t < tw->taps; ++t)
        acc += wr[t] * static_cast<double>(base[t]);
      mid[y * ow + x] = acc;
    }
  }
  // Height pass.
  for (std::size_t y = 0; y < oh; ++y) {
    const double* wr = th->weights.data() + y * th->taps;
    const double* base = mid.data() + th->starts[y] * ow;
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < th->taps; ++t)
        acc += wr[t] * base[t * ow + x];
      dst[y * ow + x] = static_cast<T>(acc);
    }
  }
}

template <typename T>
Tensor4<T> resize(const Tensor4<T>& src, std::size_t oh, std::size_t ow,
                  ResampleKernel kernel = ResampleKernel::Cubic) {
  Tensor4<T> out(src.n, src.c, oh, ow);
  for (std::size_t in = 0; in < src.n; ++in)
    for (std::size_t ic = 0; ic < src.c; ++ic)
      resize_plane(src.plane(in, ic), src.h, src.w, out.plane(in, ic), oh, ow,
                   kernel);
  return out;
}

// Adjoint of resize: scatter output-gradients back through the same tables.
// resize is a fixed linear map, so this is exactly its transpose.
template <typename T>
Tensor4<T> resize_adjoint(const Tensor4<T>& grad_out, std::size_t ih,
                          std::size_t iw, ResampleKernel kernel) {
  const std::size_t oh = grad_out.h, ow = grad_out.w;
  const auto tw = detail::get_table(iw, ow, kernel);
  const auto th = detail::get_table(ih, oh, kernel);
  Tensor4<T> out(grad_out.n, grad_out.c, ih, iw);
  std::vector<double> mid(ih * ow);
  std::vector<double> acc(ih * iw);
  for (std::size_t in = 0; in < grad_out.n; ++in) {
    for (std::size_t ic = 0; ic < grad_out.c; ++ic) {
      const T* g = grad_out.plane(in, ic);
      std::fill(mid.begin(), mid.end(), 0.0);
      // Transpose of the height pass: rows of g scatter into mid.
      for (std::size_t y = 0; y < oh; ++y) {
        const double* wr = th->weights.data() + y * th->taps;
        double* base = mid.data() + th->starts[y] * ow;
        for (std::size_t t = 0; t < th->taps; ++t) {
          const double wgt = wr[t];
          if (wgt == 0.0) continue;
          double* mrow = base + t * ow;
          const T* grow = g + y * ow;
          for (std::size_t x = 0; x < ow; ++x)
            mrow[x] += wgt * static_cast<double>(grow[x]);
        }
      }
      // Transpose of the width pass.
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t y = 0; y < ih; ++y) {
        const double* mrow = mid.data() + y * ow;
        double* arow = acc.data() + y * iw;
        for (std::size_t x = 0; x < ow; ++x) {
          const double* wr = tw->weights.data() + x * tw->taps;
          double* base = arow + tw->starts[x];
          const double gv = mrow[x];
          for (std::size_t t = 0; t < tw->taps; ++t) base[t] += wr[t] * gv;
        }
      }
      T* o = out.plane(in, ic);
      for (std::size_t i = 0; i < ih * iw; ++i) o[i] = static_cast<T>(acc[i]);
    }
  }
  return out;
}

}  // namespace overnet
