#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "overnet/autodiff.hpp"
#include "overnet/common.hpp"
#include "overnet/gemm.hpp"
#include "overnet/resample.hpp"
#include "overnet/tensor.hpp"

namespace overnet {

namespace detail {

// Norm clamp for weight normalization; keeps all-zero filter rows finite.
inline constexpr double wn_tiny = 1e-12;

// One-pass finiteness probe: the sum of |x| is finite iff every element is.
template <typename T>
void check_finite(const Tensor4<T>& t, const char* where) {
  double s = 0.0;
  for (const T& v : t.data) s += std::fabs(static_cast<double>(v));
  if (!std::isfinite(s))
    throw NumericError(std::string(where) + ": non-finite input");
}

// Lower a zero-padded 3x3 neighborhood into rows of cols (shape (C*9) x (H*W)).
template <typename T>
void im2col3(const T* src, std::size_t C, std::size_t H, std::size_t W,
             T* cols) {
  const std::size_t hw = H * W;
  for (std::size_t c = 0; c < C; ++c) {
    const T* plane = src + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* row = cols + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * hw;
        for (std::size_t y = 0; y < H; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          T* dst = row + y * W;
          if (sy < 0 || sy >= static_cast<long>(H)) {
            std::memset(dst, 0, W * sizeof(T));
            continue;
          }
          const T* srow = plane + static_cast<std::size_t>(sy) * W;
          if (kx == 0) {
            dst[0] = T(0);
            std::memcpy(dst + 1, srow, (W - 1) * sizeof(T));
          } else if (kx == 1) {
            std::memcpy(dst, srow, W * sizeof(T));
          } else {
            std::memcpy(dst, srow + 1, (W - 1) * sizeof(T));
            dst[W - 1] = T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col3: scatter-add rows of cols back into the image.
template <typename T>
void col2im3(const T* cols, std::size_t C, std::size_t H, std::size_t W,
             T* dst) {
  const std::size_t hw = H * W;
  for (std::size_t c = 0; c < C; ++c) {
    T* plane = dst + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* row =
            cols + (c * 9 + static_cast<std::size_t>(ky * 3 + kx)) * hw;
        for (std::size_t y = 0; y < H; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(H)) continue;
          T* drow = plane + static_cast<std::size_t>(sy) * W;
          const T* srow = row + y * W;
          if (kx == 0) {
            for (std::size_t x = 1; x < W; ++x) drow[x - 1] += srow[x];
          } else if (kx == 1) {
            for (std::size_t x = 0; x < W; ++x) drow[x] += srow[x];
          } else {
            for (std::size_t x = 0; x + 1 < W; ++x) drow[x + 1] += srow[x];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---- elementwise and broadcast ops ----

template <typename T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
  if (!a->val.same_shape(b->val)) throw ConfigError("add: shape mismatch");
  Tensor4<T> out = a->val;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] += b->val.data[i];
  return make_op<T>("add", std::move(out), {a, b}, [a, b](Node<T>& n) {
    for (const auto& p : {a, b}) {
      if (!p->requires_grad) continue;
      auto& g = accum_grad(p);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] += n.grad.data[i];
    }
  });
}

template <typename T>
Value<T> relu(const Value<T>& x) {
  Tensor4<T> out = x->val;
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  auto node = make_op<T>("relu", std::move(out), {x}, [x](Node<T>& n) {
    if (!x->requires_grad) return;
    auto& g = accum_grad(x);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      if (x->val.data[i] > T(0)) g.data[i] += n.grad.data[i];
  });
  if (kink_recording()) {
    node->kink_signs.resize(x->val.data.size());
    for (std::size_t i = 0; i < x->val.data.size(); ++i) {
      const T v = x->val.data[i];
      node->kink_signs[i] = v > T(0) ? 1 : (v < T(0) ? -1 : 0);
    }
  }
  return node;
}

template <typename T>
Value<T> sigmoid(const Value<T>& x) {
  Tensor4<T> out = x->val;
  for (auto& v : out.data) {
    // Branch keeps exp() argument non-positive for stability.
    if (v >= T(0)) {
      v = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T(1) + e);
    }
  }
  return make_op<T>("sigmoid", std::move(out), {x}, [x](Node<T>& n) {
    if (!x->requires_grad) return;
    auto& g = accum_grad(x);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const T y = n.val.data[i];
      g.data[i] += n.grad.data[i] * y * (T(1) - y);
    }
  });
}

// Multiply by a learned scalar (1x1x1x1 value), broadcast over all elements.
template <typename T>
Value<T> scale_gate(const Value<T>& x, const Value<T>& s) {
  if (s->val.size() != 1) throw ConfigError("scale_gate: gate must be scalar");
  const T sv = s->val.data[0];
  Tensor4<T> out = x->val;
  for (auto& v : out.data) v *= sv;
  return make_op<T>("scale_gate", std::move(out), {x, s},
                    [x, s, sv](Node<T>& n) {
                      if (x->requires_grad) {
                        auto& g = accum_grad(x);
                        for (std::size_t i = 0; i < g.data.size(); ++i)
                          g.data[i] += n.grad.data[i] * sv;
                      }
                      if (s->requires_grad) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < x->val.data.size(); ++i)
                          acc += static_cast<double>(n.grad.data[i]) *
                                 static_cast<double>(x->val.data[i]);
                        accum_grad(s).data[0] += static_cast<T>(acc);
                      }
                    });
}

// Broadcast add: x is N,C,H,W and s is N,C,1,1, added at every spatial
// position.
template <typename T>
Value<T> add_channels(const Value<T>& x, const Value<T>& s) {
  if (s->val.n != x->val.n || s->val.c != x->val.c || s->val.h != 1 ||
      s->val.w != 1)
    throw ConfigError("add_channels: operand shape mismatch");
  Tensor4<T> out = x->val;
  const std::size_t hw = x->val.h * x->val.w;
  for (std::size_t in = 0; in < x->val.n; ++in)
    for (std::size_t c = 0; c < x->val.c; ++c) {
      const T sv = s->val.at(in, c, 0, 0);
      T* p = out.plane(in, c);
      for (std::size_t i = 0; i < hw; ++i) p[i] += sv;
    }
  return make_op<T>(
      "add_channels", std::move(out), {x, s}, [x, s, hw](Node<T>& n) {
        if (x->requires_grad) {
          auto& g = accum_grad(x);
          for (std::size_t i = 0; i < g.data.size(); ++i)
            g.data[i] += n.grad.data[i];
        }
        if (s->requires_grad) {
          auto& g = accum_grad(s);
          for (std::size_t in = 0; in < x->val.n; ++in)
            for (std::size_t c = 0; c < x->val.c; ++c) {
              const T* gp = n.grad.plane(in, c);
              double acc = 0.0;
              for (std::size_t i = 0; i < hw; ++i)
                acc += static_cast<double>(gp[i]);
              g.at(in, c, 0, 0) += static_cast<T>(acc);
            }
        }
      });
}

// Per-(n,c) gating: x is N,C,H,W and s is N,C,1,1.
template <typename T>
Value<T> mul_channels(const Value<T>& x, const Value<T>& s) {
  if (s->val.n != x->val.n || s->val.c != x->val.c || s->val.h != 1 ||
      s->val.w != 1)
    throw ConfigError("mul_channels: gate shape mismatch");
  Tensor4<T> out = x->val;
  const std::size_t hw = x->val.h * x->val.w;
  for (std::size_t in = 0; in < x->val.n; ++in)
    for (std::size_t c = 0; c < x->val.c; ++c) {
      const T sv = s->val.at(in, c, 0, 0);
      T* p = out.plane(in, c);
      for (std::size_t i = 0; i < hw; ++i) p[i] *= sv;
    }
  return make_op<T>(
      "mul_channels", std::move(out), {x, s}, [x, s, hw](Node<T>& n) {
        for (std::size_t in = 0; in < x->val.n; ++in)
          for (std::size_t c = 0; c < x->val.c; ++c) {
            const T* gp = n.grad.plane(in, c);
            if (x->requires_grad) {
              const T sv = s->val.at(in, c, 0, 0);
              T* xg = accum_grad(x).plane(in, c);
              for (std::size_t i = 0; i < hw; ++i) xg[i] += gp[i] * sv;
            }
            if (s->requires_grad) {
              const T* xp = x->val.plane(in, c);
              double acc = 0.0;
              for (std::size_t i = 0; i < hw; ++i)
                acc += static_cast<double>(gp[i]) * static_cast<double>(xp[i]);
              accum_grad(s).at(in, c, 0, 0) += static_cast<T>(acc);
            }
          }
      });
}

template <typename T>
Value<T> global_avg_pool(const Value<T>& x) {
  Tensor4<T> out(x->val.n, x->val.c, 1, 1);
  const std::size_t hw = x->val.h * x->val.w;
  for (std::size_t in = 0; in < x->val.n; ++in)
    for (std::size_t c = 0; c < x->val.c; ++c) {
      const T* p = x->val.plane(in, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(p[i]);
      out.at(in, c, 0, 0) = static_cast<T>(acc / static_cast<double>(hw));
    }
  return make_op<T>("global_avg_pool", std::move(out), {x}, [x](Node<T>& n) {
    if (!x->requires_grad) return;
    const std::size_t hw = x->val.h * x->val.w;
    const T inv = T(1) / static_cast<T>(hw);
    auto& g = accum_grad(x);
    for (std::size_t in = 0; in < x->val.n; ++in)
      for (std::size_t c = 0; c < x->val.c; ++c) {
        const T gv = n.grad.at(in, c, 0, 0) * inv;
        T* gp = g.plane(in, c);
        for (std::size_t i = 0; i < hw; ++i) gp[i] += gv;
      }
  });
}

template <typename T>
Value<T> concat_channels(const std::vector<Value<T>>& xs) {
  if (xs.empty()) throw ConfigError("concat_channels: empty input");
  std::size_t ctot = 0;
  for (const auto& x : xs) {
    if (x->val.n != xs[0]->val.n || x->val.h != xs[0]->val.h ||
        x->val.w != xs[0]->val.w)
      throw ConfigError("concat_channels: shape mismatch");
    ctot += x->val.c;
  }
  Tensor4<T> out(xs[0]->val.n, ctot, xs[0]->val.h, xs[0]->val.w);
  const std::size_t hw = out.h * out.w;
  for (std::size_t in = 0; in < out.n; ++in) {
    std::size_t co = 0;
    for (const auto& x : xs) {
      std::memcpy(out.plane(in, co), x->val.plane(in, 0),
                  x->val.c * hw * sizeof(T));
      co += x->val.c;
    }
  }
  return make_op<T>("concat_channels", std::move(out), xs, [xs](Node<T>& n) {
    const std::size_t hw = n.val.h * n.val.w;
    for (std::size_t in = 0; in < n.val.n; ++in) {
      std::size_t co = 0;
      for (const auto& x : xs) {
        if (x->requires_grad) {
          T* xg = accum_grad(x).plane(in, 0);
          const T* gp = n.grad.plane(in, co);
          for (std::size_t i = 0; i < x->val.c * hw; ++i) xg[i] += gp[i];
        }
        co += x->val.c;
      }
    }
  });
}

// Rearrange (N, C*r^2, H, W) -> (N, C, H*r, W*r); channel c*r^2 + dy*r + dx
// lands at spatial offset (dy, dx) of output channel c.
template <typename T>
Value<T> pixel_shuffle(const Value<T>& x, std::size_t r) {
  const std::size_t r2 = r * r;
  if (r == 0 || x->val.c % r2 != 0)
    throw ConfigError("pixel_shuffle: channels not divisible by r^2");
  const std::size_t co = x->val.c / r2;
  const std::size_t H = x->val.h, W = x->val.w;
  Tensor4<T> out(x->val.n, co, H * r, W * r);
  for (std::size_t in = 0; in < x->val.n; ++in)
    for (std::size_t c = 0; c < co; ++c)
      for (std::size_t dy = 0; dy < r; ++dy)
        for (std::size_t dx = 0; dx < r; ++dx) {
          const T* src = x->val.plane(in, c * r2 + dy * r + dx);
          T* dst = out.plane(in, c);
          for (std::size_t y = 0; y < H; ++y)
            for (std::size_t xx = 0; xx < W; ++xx)
              dst[(y * r + dy) * W * r + xx * r + dx] = src[y * W + xx];
        }
  return make_op<T>("pixel_shuffle", std::move(out), {x}, [x, r](Node<T>& n) {
    if (!x->requires_grad) return;
    const std::size_t r2 = r * r;
    const std::size_t co = x->val.c / r2;
    const std::size_t H = x->val.h, W = x->val.w;
    auto& g = accum_grad(x);
    for (std::size_t in = 0; in < x->val.n; ++in)
      for (std::size_t c = 0; c < co; ++c)
        for (std::size_t dy = 0; dy < r; ++dy)
          for (std::size_t dx = 0; dx < r; ++dx) {
            T* dst = g.plane(in, c * r2 + dy * r + dx);
            const T* src = n.grad.plane(in, c);
            for (std::size_t y = 0; y < H; ++y)
              for (std::size_t xx = 0; xx < W; ++xx)
                dst[y * W + xx] += src[(y * r + dy) * W * r + xx * r + dx];
          }
  });
}

// Resampling as a graph op. The interpolation weights are data-independent,
// so this is a fixed linear map; backward applies its transpose.
template <typename T>
Value<T> resize_value(const Value<T>& x, std::size_t oh, std::size_t ow,
                      ResampleKernel kernel = ResampleKernel::Cubic) {
  const std::size_t ih = x->val.h, iw = x->val.w;
  Tensor4<T> out = resize(x->val, oh, ow, kernel);
  return make_op<T>("resize", std::move(out), {x},
                    [x, ih, iw, kernel](Node<T>& n) {
                      if (!x->requires_grad) return;
                      Tensor4<T> gin = resize_adjoint(n.grad, ih, iw, kernel);
                      auto& g = accum_grad(x);
                      for (std::size_t i = 0; i < g.data.size(); ++i)
                        g.data[i] += gin.data[i];
                    });
}

// ---- convolution ----

// 2-D convolution, stride 1, pad k/2 (same-size output), kernel 1 or 3.
// x: (N, Cin, H, W), w: (Cout, Cin, k, k), b: (Cout, 1, 1, 1).
// Lowered to GEMM; the 1x1 case multiplies the input planes directly.
template <typename T>
Value<T> conv2d(const Value<T>& x, const Value<T>& w, const Value<T>& b) {
  const std::size_t N = x->val.n, C = x->val.c, H = x->val.h, W = x->val.w;
  const std::size_t O = w->val.n, k = w->val.h;
  if (w->val.c != C || w->val.w != k || (k != 1 && k != 3))
    throw ConfigError("conv2d: bad weight shape");
  if (b->val.n != O || b->val.size() != O)
    throw ConfigError("conv2d: bad bias shape");
  detail::check_finite(x->val, "conv2d");

  const std::size_t hw = H * W;
  Tensor4<T> out(N, O, H, W);
  std::vector<T> cols;
  if (k == 3) cols.resize(C * 9 * hw);
  for (std::size_t in = 0; in < N; ++in) {
    for (std::size_t o = 0; o < O; ++o) {
      T* p = out.plane(in, o);
      const T bv = b->val.data[o];
      for (std::size_t i = 0; i < hw; ++i) p[i] = bv;
    }
    if (k == 1) {
      detail::gemm_nn_acc(O, hw, C, w->val.data.data(), x->val.plane(in, 0),
                          out.plane(in, 0));
    } else {
      detail::im2col3(x->val.plane(in, 0), C, H, W, cols.data());
      detail::gemm_nn_acc(O, hw, C * 9, w->val.data.data(), cols.data(),
                          out.plane(in, 0));
    }
  }

  return make_op<T>("conv2d", std::move(out), {x, w, b}, [x, w, b](Node<T>& n) {
    const std::size_t N = x->val.n, C = x->val.c, H = x->val.h, W = x->val.w;
    const std::size_t O = w->val.n, k = w->val.h;
    const std::size_t hw = H * W;
    if (b->requires_grad) {
      auto& gb = accum_grad(b);
      for (std::size_t in = 0; in < N; ++in)
        for (std::size_t o = 0; o < O; ++o) {
          const T* gp = n.grad.plane(in, o);
          double acc = 0.0;
          for (std::size_t i = 0; i < hw; ++i)
            acc += static_cast<double>(gp[i]);
          gb.data[o] += static_cast<T>(acc);
        }
    }
    std::vector<T> cols, dcols;
    if (k == 3) {
      cols.resize(C * 9 * hw);
      if (x->requires_grad) dcols.resize(C * 9 * hw);
    }
    for (std::size_t in = 0; in < N; ++in) {
      const T* g = n.grad.plane(in, 0);
      if (k == 1) {
        if (w->requires_grad)
          detail::gemm_nt_acc(O, C, hw, g, x->val.plane(in, 0),
                              accum_grad(w).data.data());
        if (x->requires_grad)
          detail::gemm_tn_acc(C, hw, O, w->val.data.data(), g,
                              accum_grad(x).plane(in, 0));
      } else {
        // The lowered input is rebuilt here rather than kept from the
        // forward pass; it is the largest buffer in the op.
        detail::im2col3(x->val.plane(in, 0), C, H, W, cols.data());
        if (w->requires_grad)
          detail::gemm_nt_acc(O, C * 9, hw, g, cols.data(),
                              accum_grad(w).data.data());
        if (x->requires_grad) {
          std::memset(dcols.data(), 0, dcols.size() * sizeof(T));
          detail::gemm_tn_acc(C * 9, hw, O, w->val.data.data(), g,
                              dcols.data());
          detail::col2im3(dcols.data(), C, H, W, accum_grad(x).plane(in, 0));
        }
      }
    }
  });
}

// Weight normalization: w[o] = v[o] * (g[o] / max(||v[o]||, tiny)).
// The clamp makes an all-zero filter row well-defined (w = 0, with zero
// gradient into g).
template <typename T>
Value<T> weight_norm(const Value<T>& v, const Value<T>& g) {
  const std::size_t O = v->val.n;
  if (g->val.size() != O) throw ConfigError("weight_norm: bad gain shape");
  const std::size_t row = v->val.c * v->val.h * v->val.w;
  Tensor4<T> out = v->val;
  std::vector<double> norms(O);
  for (std::size_t o = 0; o < O; ++o) {
    const T* vp = v->val.data.data() + o * row;
    double ss = 0.0;
    for (std::size_t i = 0; i < row; ++i)
      ss += static_cast<double>(vp[i]) * static_cast<double>(vp[i]);
    norms[o] = std::sqrt(ss);
    const double f = static_cast<double>(g->val.data[o]) /
                     std::max(norms[o], detail::wn_tiny);
    T* wp = out.data.data() + o * row;
    for (std::size_t i = 0; i < row; ++i)
      wp[i] = static_cast<T>(static_cast<double>(vp[i]) * f);
  }
  return make_op<T>(
      "weight_norm", std::move(out), {v, g},
      [v, g, norms = std::move(norms), row](Node<T>& n) {
        const std::size_t O = v->val.n;
        for (std::size_t o = 0; o < O; ++o) {
          const T* vp = v->val.data.data() + o * row;
          const T* dw = n.grad.data.data() + o * row;
          const double nrm = norms[o];
          const double neff = std::max(nrm, detail::wn_tiny);
          const double gain = static_cast<double>(g->val.data[o]);
          double s = 0.0;
          for (std::size_t i = 0; i < row; ++i)
            s += static_cast<double>(dw[i]) * static_cast<double>(vp[i]);
          if (g->requires_grad)
            accum_grad(g).data[o] += static_cast<T>(s / neff);
          if (v->requires_grad) {
            const double f = gain / neff;
            const double proj =
                nrm > detail::wn_tiny ? gain * s / (neff * neff * neff) : 0.0;
            T* gv = accum_grad(v).data.data() + o * row;
            for (std::size_t i = 0; i < row; ++i)
              gv[i] += static_cast<T>(f * static_cast<double>(dw[i]) -
                                      proj * static_cast<double>(vp[i]));
          }
        }
      });
}

// ---- reductions ----

// Scalar sum of all elements.
template <typename T>
Value<T> sum_all(const Value<T>& x) {
  double acc = 0.0;
  for (const T& v : x->val.data) acc += static_cast<double>(v);
  Tensor4<T> out(1, 1, 1, 1);
  out.data[0] = static_cast<T>(acc);
  return make_op<T>("sum_all", std::move(out), {x}, [x](Node<T>& n) {
    if (!x->requires_grad) return;
    const T gv = n.grad.data[0];
    auto& g = accum_grad(x);
    for (auto& v : g.data) v += gv;
  });
}

// Mean absolute deviation from a fixed target; the scalar loss atom.
// Subgradient 0 at exact ties.
template <typename T>
Value<T> mean_abs_diff(const Value<T>& pred, const Tensor4<T>& target) {
  if (!pred->val.same_shape(target))
    throw ConfigError("mean_abs_diff: shape mismatch");
  const std::size_t count = pred->val.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i)
    acc += std::fabs(static_cast<double>(pred->val.data[i]) -
                     static_cast<double>(target.data[i]));
  Tensor4<T> out(1, 1, 1, 1);
  out.data[0] = static_cast<T>(acc / static_cast<double>(count));
  auto node = make_op<T>("mean_abs_diff", std::move(out), {pred},
                         [pred, target](Node<T>& n) {
                           if (!pred->requires_grad) return;
                           const std::size_t count = pred->val.size();
                           const T scale =
                               n.grad.data[0] / static_cast<T>(count);
                           auto& g = accum_grad(pred);
                           for (std::size_t i = 0; i < count; ++i) {
                             const T d = pred->val.data[i] - target.data[i];
                             if (d > T(0))
                               g.data[i] += scale;
                             else if (d < T(0))
                               g.data[i] -= scale;
                           }
                         });
  if (kink_recording()) {
    node->kink_signs.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const T d = pred->val.data[i] - target.data[i];
      node->kink_signs[i] = d > T(0) ? 1 : (d < T(0) ? -1 : 0);
    }
  }
  return node;
}

// Scalar dot product with a fixed cotangent; loss atom for gradient probes.
template <typename T>
Value<T> dot_const(const Value<T>& x, const Tensor4<T>& r) {
  if (!x->val.same_shape(r)) throw ConfigError("dot_const: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x->val.data.size(); ++i)
    acc += static_cast<double>(x->val.data[i]) *
           static_cast<double>(r.data[i]);
  Tensor4<T> out(1, 1, 1, 1);
  out.data[0] = static_cast<T>(acc);
  return make_op<T>("dot_const", std::move(out), {x}, [x, r](Node<T>& n) {
    if (!x->requires_grad) return;
    const T gv = n.grad.data[0];
    auto& g = accum_grad(x);
    for (std::size_t i = 0; i < g.data.size(); ++i)
      g.data[i] += gv * r.data[i];
  });
}

}  // namespace overnet
