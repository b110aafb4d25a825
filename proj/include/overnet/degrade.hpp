#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "overnet/common.hpp"
#include "overnet/resample.hpp"
#include "overnet/rng.hpp"
#include "overnet/scale.hpp"
#include "overnet/tensor.hpp"

namespace overnet {

enum class DegradeKind { BI, BD, DN };

inline DegradeKind parse_degrade_kind(const std::string& s) {
  if (s == "BI" || s == "bi") return DegradeKind::BI;
  if (s == "BD" || s == "bd") return DegradeKind::BD;
  if (s == "DN" || s == "dn") return DegradeKind::DN;
  throw ConfigError("unknown degradation: " + s);
}

inline const char* degrade_kind_name(DegradeKind k) {
  switch (k) {
    case DegradeKind::BI: return "bi";
    case DegradeKind::BD: return "bd";
    case DegradeKind::DN: return "dn";
  }
  return "bi";
}

struct Degradation {
  DegradeKind kind = DegradeKind::BI;
  Rational scale{4, 1};
  double blur_sigma = 1.6;
  std::size_t kernel_size = 7;
  double noise_level = 30.0;  // gaussian sigma in 8-bit units
  bool blur_first = false;    // blur the source before downsampling
};

namespace detail {

// Normalized 1-D gaussian taps. The separable product of two of these is
// the normalized 2-D kernel: the per-axis sums each divide out, which is
// the same as dividing the 2-D exponential grid by its total.
inline std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  if (size % 2 == 0 || size == 0) throw ConfigError("blur size must be odd");
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(size / 2);
  std::vector<double> w(size);
  double sum = 0.0;
  for (std::ptrdiff_t i = -r; i <= r; ++i) {
    w[i + r] = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    sum += w[i + r];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Half-sample reflection: -1 -> 0, -2 -> 1, n -> n-1. Valid while the
// kernel radius does not exceed the extent.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) i = -i - 1;
  const auto sn = static_cast<std::ptrdiff_t>(n);
  if (i >= sn) i = 2 * sn - 1 - i;
  return static_cast<std::size_t>(i);
}

}  // namespace detail

// Separable gaussian blur with reflect padding, same output size.
inline Tensor4f blur_reflect(const Tensor4f& img, std::size_t size,
                             double sigma) {
  const auto taps = detail::gaussian_taps(size, sigma);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(size / 2);
  if (img.h < size / 2 || img.w < size / 2)
    throw UsageError("blur: image smaller than the kernel radius");
  Tensor4f out(img.n, img.c, img.h, img.w);
  std::vector<double> mid(img.h * img.w);
  const std::size_t h = img.h, w = img.w;
  for (std::size_t n = 0; n < img.n; ++n)
    for (std::size_t c = 0; c < img.c; ++c) {
      const float* src = img.plane(n, c);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double acc = 0.0;
          for (std::ptrdiff_t k = -r; k <= r; ++k) {
            const std::size_t xs =
                detail::reflect_index(static_cast<std::ptrdiff_t>(x) + k, w);
            acc += taps[k + r] * src[y * w + xs];
          }
          mid[y * w + x] = acc;
        }
      float* dst = out.plane(n, c);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double acc = 0.0;
          for (std::ptrdiff_t k = -r; k <= r; ++k) {
            const std::size_t ys =
                detail::reflect_index(static_cast<std::ptrdiff_t>(y) + k, h);
            acc += taps[k + r] * mid[ys * w + x];
          }
          dst[y * w + x] = static_cast<float>(acc);
        }
    }
  return out;
}

inline void clamp01(Tensor4f& t) {
  for (float& v : t.data) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
}

// Synthesizes the low-resolution observation of hr at 1/spec.scale. The
// seed only matters for DN; equal arguments always produce identical bytes.
inline Tensor4f degrade(const Tensor4f& hr, const Degradation& d,
                        std::uint64_t seed) {
  const Rational& scale = d.scale;
  const std::size_t oh = scale.scale_down(hr.h), ow = scale.scale_down(hr.w);
  if (oh == 0 || ow == 0)
    throw UsageError("degrade: image too small for scale " + scale.str());
  Tensor4f lr(0, 0, 0, 0);
  switch (d.kind) {
    case DegradeKind::BI:
      lr = resize(hr, oh, ow, ResampleKernel::Cubic);
      break;
    case DegradeKind::BD:
      if (d.blur_first)
        lr = resize(blur_reflect(hr, d.kernel_size, d.blur_sigma), oh, ow,
                    ResampleKernel::Cubic);
      else
        lr = blur_reflect(resize(hr, oh, ow, ResampleKernel::Cubic),
                          d.kernel_size, d.blur_sigma);
      break;
    case DegradeKind::DN: {
      lr = resize(hr, oh, ow, ResampleKernel::Cubic);
      if (d.noise_level != 0.0) {
        RandomStream rs(seed, "noise", 0);
        const double s = d.noise_level / 255.0;
        for (float& v : lr.data)
          v = static_cast<float>(v + s * rs.next_gaussian());
      }
      break;
    }
  }
  clamp01(lr);
  return lr;
}

inline Tensor4f crop(const Tensor4f& t, std::size_t y0, std::size_t x0,
                     std::size_t h, std::size_t w) {
  if (y0 + h > t.h || x0 + w > t.w) throw UsageError("crop out of bounds");
  Tensor4f out(t.n, t.c, h, w);
  for (std::size_t n = 0; n < t.n; ++n)
    for (std::size_t c = 0; c < t.c; ++c) {
      const float* src = t.plane(n, c);
      float* dst = out.plane(n, c);
      for (std::size_t y = 0; y < h; ++y)
        std::memcpy(dst + y * w, src + (y0 + y) * t.w + x0,
                    w * sizeof(float));
    }
  return out;
}

inline Tensor4f flip_h(const Tensor4f& t) {
  Tensor4f out(t.n, t.c, t.h, t.w);
  for (std::size_t n = 0; n < t.n; ++n)
    for (std::size_t c = 0; c < t.c; ++c) {
      const float* src = t.plane(n, c);
      float* dst = out.plane(n, c);
      for (std::size_t y = 0; y < t.h; ++y)
        for (std::size_t x = 0; x < t.w; ++x)
          dst[y * t.w + x] = src[y * t.w + (t.w - 1 - x)];
    }
  return out;
}

// Quarter turn counter-clockwise; square planes only.
inline Tensor4f rot90(const Tensor4f& t) {
  if (t.h != t.w) throw UsageError("rot90: plane must be square");
  Tensor4f out(t.n, t.c, t.h, t.w);
  const std::size_t s = t.h;
  for (std::size_t n = 0; n < t.n; ++n)
    for (std::size_t c = 0; c < t.c; ++c) {
      const float* src = t.plane(n, c);
      float* dst = out.plane(n, c);
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x)
          dst[y * s + x] = src[x * s + (s - 1 - y)];
    }
  return out;
}

struct PatchPair {
  Tensor4f hr;
  Tensor4f lr;
};

// Draws an aligned (hr, lr) training crop with flip / quarter-turn
// augmentation applied to both halves identically. Draw order from
// stream (seed, "patch", 0): y0, x0, flip?, rotate?.
inline PatchPair sample_patch(const Tensor4f& hr, const Tensor4f& lr,
                              std::size_t patch, std::size_t scale,
                              std::uint64_t seed) {
  if (scale == 0 || hr.h != lr.h * scale || hr.w != lr.w * scale)
    throw UsageError("sample_patch: image pair is not aligned at x" +
                     std::to_string(scale));
  if (patch == 0 || patch > lr.h || patch > lr.w)
    throw UsageError("sample_patch: patch " + std::to_string(patch) +
                     " exceeds the low-resolution image");
  RandomStream rs(seed, "patch", 0);
  const std::size_t y0 = rs.next_index(lr.h - patch + 1);
  const std::size_t x0 = rs.next_index(lr.w - patch + 1);
  PatchPair p{crop(hr, y0 * scale, x0 * scale, patch * scale, patch * scale),
              crop(lr, y0, x0, patch, patch)};
  if (rs.next_u64() & 1) {
    p.hr = flip_h(p.hr);
    p.lr = flip_h(p.lr);
  }
  if (rs.next_u64() & 1) {
    p.hr = rot90(p.hr);
    p.lr = rot90(p.lr);
  }
  return p;
}

}  // namespace overnet
