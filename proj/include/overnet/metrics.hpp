#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "overnet/degrade.hpp"
#include "overnet/image.hpp"
#include "overnet/scale.hpp"
#include "overnet/tensor.hpp"

namespace overnet {

namespace detail {

// Border width dropped before scoring: one pixel per unit of scale,
// rounded up for fractional scales.
inline std::size_t crop_border(const Rational& s) {
  return static_cast<std::size_t>((s.num + s.den - 1) / s.den);
}

// Y planes of both images with `border` pixels removed on every side,
// as doubles on the 0..255 range.  Shared precondition checks for the
// two metrics live here.
struct YPair {
  std::size_t h = 0, w = 0;
  std::vector<double> a, b;
};

inline YPair cropped_y(const Tensor4f& sr, const Tensor4f& hr,
                       std::size_t border, const char* what) {
  if (sr.n != hr.n || sr.c != hr.c || sr.h != hr.h || sr.w != hr.w)
    throw UsageError(std::string(what) + ": image dimensions differ");
  if (sr.h <= 2 * border || sr.w <= 2 * border)
    throw UsageError(std::string(what) + ": image smaller than 2*scale+1");
  const Tensor4f ya = rgb_to_y(sr), yb = rgb_to_y(hr);
  YPair p;
  p.h = sr.h - 2 * border;
  p.w = sr.w - 2 * border;
  p.a.resize(p.h * p.w);
  p.b.resize(p.h * p.w);
  for (std::size_t y = 0; y < p.h; ++y)
    for (std::size_t x = 0; x < p.w; ++x) {
      const std::size_t src = (y + border) * sr.w + (x + border);
      p.a[y * p.w + x] = ya.data[src];
      p.b[y * p.w + x] = yb.data[src];
    }
  return p;
}

// Separable filter keeping only fully covered (valid) positions.
inline std::vector<double> sep_filter_valid(const std::vector<double>& src,
                                            std::size_t h, std::size_t w,
                                            const std::vector<double>& taps) {
  const std::size_t k = taps.size();
  const std::size_t ow = w - k + 1, oh = h - k + 1;
  std::vector<double> mid(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * src[y * w + x + t];
      mid[y * ow + x] = acc;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * mid[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

// Y-channel peak signal-to-noise ratio in dB over the border-cropped
// region.  Identical inputs give +infinity (rendered as "inf").
inline double psnr(const Tensor4f& sr, const Tensor4f& hr,
                   const Rational& scale, bool crop = true) {
  const std::size_t border = crop ? detail::crop_border(scale) : 0;
  const auto p = detail::cropped_y(sr, hr, border, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < p.a.size(); ++i) {
    const double d = p.a[i] - p.b[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(p.a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// Single-scale SSIM on the border-cropped Y planes: 11x11 Gaussian
// window (sigma 1.5), K1=0.01, K2=0.03, dynamic range 255, averaged
// over valid window positions only.
inline double ssim(const Tensor4f& sr, const Tensor4f& hr,
                   const Rational& scale, bool crop = true) {
  const std::size_t border = crop ? detail::crop_border(scale) : 0;
  const auto p = detail::cropped_y(sr, hr, border, "ssim");
  constexpr std::size_t kWin = 11;
  if (p.h < kWin || p.w < kWin)
    throw UsageError("ssim: cropped image smaller than the 11x11 window");
  const auto taps = detail::gaussian_taps(kWin, 1.5);

  const std::size_t n = p.a.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = p.a[i] * p.a[i];
    bb[i] = p.b[i] * p.b[i];
    ab[i] = p.a[i] * p.b[i];
  }
  const auto mu_a = detail::sep_filter_valid(p.a, p.h, p.w, taps);
  const auto mu_b = detail::sep_filter_valid(p.b, p.h, p.w, taps);
  const auto m_aa = detail::sep_filter_valid(aa, p.h, p.w, taps);
  const auto m_bb = detail::sep_filter_valid(bb, p.h, p.w, taps);
  const auto m_ab = detail::sep_filter_valid(ab, p.h, p.w, taps);

  constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = m_aa[i] - ma * ma;
    const double vb = m_bb[i] - mb * mb;
    const double cov = m_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
             ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return total / static_cast<double>(mu_a.size());
}

// One scored image/scale pair; `base_*` carry the plain bicubic
// baseline for the same pair.
struct EvalRow {
  std::string name;
  Rational scale;
  double psnr_db = 0.0, ssim_val = 0.0;
  double base_psnr_db = 0.0, base_ssim_val = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by (name, scale)
  std::string config_fingerprint;
  double wall_seconds = 0.0;

  // Mean model and baseline scores keyed by scale.
  std::map<Rational, EvalRow> aggregate() const {
    std::map<Rational, EvalRow> agg;
    std::map<Rational, std::size_t> counts;
    for (const auto& r : rows) {
      auto& a = agg[r.scale];
      a.name = "mean";
      a.scale = r.scale;
      a.psnr_db += r.psnr_db;
      a.ssim_val += r.ssim_val;
      a.base_psnr_db += r.base_psnr_db;
      a.base_ssim_val += r.base_ssim_val;
      ++counts[r.scale];
    }
    for (auto& [s, a] : agg) {
      const double n = static_cast<double>(counts[s]);
      a.psnr_db /= n;
      a.ssim_val /= n;
      a.base_psnr_db /= n;
      a.base_ssim_val /= n;
    }
    return agg;
  }

  static std::string format_db(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
  }
  static std::string format_ssim(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
  }

  // Line-delimited records: name<TAB>scale<TAB>psnr<TAB>ssim, per-image
  // rows first, then one "mean" row per scale.
  std::string machine_lines() const {
    std::string out;
    const auto emit = [&out](const EvalRow& r) {
      out += r.name;
      out += '\t';
      out += r.scale.str();
      out += '\t';
      out += format_db(r.psnr_db);
      out += '\t';
      out += format_ssim(r.ssim_val);
      out += '\n';
    };
    for (const auto& r : rows) emit(r);
    for (const auto& [s, a] : aggregate()) emit(a);
    return out;
  }

  // Human-readable table including the bicubic baseline columns.
  std::string table() const {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-20s %6s %10s %9s %10s %9s\n", "image",
                  "scale", "psnr", "ssim", "bicubic", "ssim");
    out += buf;
    const auto emit = [&](const EvalRow& r) {
      std::snprintf(buf, sizeof buf, "%-20s %6s %10s %9s %10s %9s\n",
                    r.name.c_str(), r.scale.str().c_str(),
                    format_db(r.psnr_db).c_str(),
                    format_ssim(r.ssim_val).c_str(),
                    format_db(r.base_psnr_db).c_str(),
                    format_ssim(r.base_ssim_val).c_str());
      out += buf;
    };
    for (const auto& r : rows) emit(r);
    for (const auto& [s, a] : aggregate()) emit(a);
    return out;
  }
};

}  // namespace overnet
