#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <system_error>

#include "overnet/rng.hpp"
#include "overnet/tensor.hpp"

namespace testing_util {

// Scratch directory under the system temp root; removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("overnet-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

// Smooth two-tone pattern; easy to overfit, survives PNG quantization.
inline overnet::Tensor4f synth_image(std::size_t h, std::size_t w,
                                     std::uint64_t seed) {
  overnet::Tensor4f img(1, 3, h, w);
  overnet::RandomStream rs(seed, "phase", 0);
  const double p1 = rs.next_double() * 6.28, p2 = rs.next_double() * 6.28;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double v = 0.5 +
                   0.25 * std::sin(2.0 * M_PI * (x + 3.0 * c) / 12.0 + p1) *
                       std::cos(2.0 * M_PI * y / 12.0) +
                   0.15 * std::sin(2.0 * M_PI * (x + y) / 7.0 + p2);
        img.data[(c * h + y) * w + x] =
            static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  return img;
}

template <typename T>
void fill_uniform(overnet::Tensor4<T>& t, std::uint64_t seed,
                  const char* purpose, double lo, double hi) {
  overnet::RandomStream rs(seed, purpose, 0);
  for (auto& v : t.data) v = static_cast<T>(rs.next_uniform(lo, hi));
}

// Uniform magnitude in [margin, margin+span) with random sign; keeps values
// away from the origin for kink-free gradient probes.
template <typename T>
void fill_signed_away_from_zero(overnet::Tensor4<T>& t, std::uint64_t seed,
                                const char* purpose, double margin,
                                double span) {
  overnet::RandomStream rs(seed, purpose, 0);
  for (auto& v : t.data) {
    const double mag = rs.next_uniform(margin, margin + span);
    v = static_cast<T>(rs.next_double() < 0.5 ? -mag : mag);
  }
}

template <typename A, typename B>
double max_abs_diff(const overnet::Tensor4<A>& a,
                    const overnet::Tensor4<B>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::fabs(static_cast<double>(a.data[i]) -
                                      static_cast<double>(b.data[i])));
  return worst;
}

template <typename B>
double max_abs(const overnet::Tensor4<B>& t) {
  double worst = 0.0;
  for (const auto& v : t.data)
    worst = std::max(worst, std::fabs(static_cast<double>(v)));
  return worst;
}

}  // namespace testing_util
