#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "overnet/common.hpp"
#include "overnet/tensor.hpp"

namespace overnet {

// Reads an 8-bit PNG into a (1,3,H,W) tensor with values b/255. Palette,
// grayscale and 16-bit inputs are expanded to RGB by libpng; alpha is
// dropped against a black background.
inline Tensor4f png_read(const std::string& path) {
  png_image im;
  std::memset(&im, 0, sizeof im);
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&im, path.c_str())) {
    std::string msg = im.message;
    png_image_free(&im);
    throw IoError("read " + path + ": " + msg);
  }
  im.format = PNG_FORMAT_RGB;
  const std::size_t h = im.height, w = im.width;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(im));
  if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = im.message;
    png_image_free(&im);
    throw IoError("read " + path + ": " + msg);
  }
  Tensor4f out(1, 3, h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    float* dst = out.plane(0, c);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        dst[y * w + x] = buf[(y * w + x) * 3 + c] / 255.0f;
  }
  return out;
}

// Writes a (1,3,H,W) tensor as an 8-bit RGB PNG. Each value is clamped to
// [0,1] and quantized as round(v * 255).
inline void png_write(const std::string& path, const Tensor4f& img) {
  if (img.n != 1 || img.c != 3)
    throw UsageError("png_write: expected a single RGB image, got n=" +
                     std::to_string(img.n) + " c=" + std::to_string(img.c));
  const std::size_t h = img.h, w = img.w;
  std::vector<unsigned char> buf(h * w * 3);
  for (std::size_t c = 0; c < 3; ++c) {
    const float* src = img.plane(0, c);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        float v = src[y * w + x];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        buf[(y * w + x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
  }
  png_image im;
  std::memset(&im, 0, sizeof im);
  im.version = PNG_IMAGE_VERSION;
  im.width = static_cast<png_uint_32>(w);
  im.height = static_cast<png_uint_32>(h);
  im.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&im, path.c_str(), 0, buf.data(), 0, nullptr)) {
    std::string msg = im.message;
    png_image_free(&im);
    throw IoError("write " + path + ": " + msg);
  }
}

// BT.601 luma in the 0..255 digital range: Y = 16 + 65.481 R + 128.553 G
// + 24.966 B with R,G,B in [0,1]. Output shape (N,1,H,W).
inline Tensor4f rgb_to_y(const Tensor4f& img) {
  if (img.c != 3)
    throw UsageError("rgb_to_y: expected 3 channels, got " +
                     std::to_string(img.c));
  Tensor4f out(img.n, 1, img.h, img.w);
  const std::size_t hw = img.h * img.w;
  for (std::size_t n = 0; n < img.n; ++n) {
    const float* r = img.plane(n, 0);
    const float* g = img.plane(n, 1);
    const float* b = img.plane(n, 2);
    float* y = out.plane(n, 0);
    for (std::size_t i = 0; i < hw; ++i)
      y[i] = static_cast<float>(16.0 + 65.481 * r[i] + 128.553 * g[i] +
                                24.966 * b[i]);
  }
  return out;
}

// Crops bottom/right so both dimensions are multiples of m.
inline Tensor4f modcrop(const Tensor4f& img, std::size_t m) {
  if (m == 0) throw UsageError("modcrop: zero modulus");
  const std::size_t h = img.h - img.h % m, w = img.w - img.w % m;
  if (h == 0 || w == 0)
    throw UsageError("modcrop: image smaller than modulus " +
                     std::to_string(m));
  if (h == img.h && w == img.w) return img;
  Tensor4f out(img.n, img.c, h, w);
  for (std::size_t n = 0; n < img.n; ++n)
    for (std::size_t c = 0; c < img.c; ++c) {
      const float* src = img.plane(n, c);
      float* dst = out.plane(n, c);
      for (std::size_t y = 0; y < h; ++y)
        std::memcpy(dst + y * w, src + y * img.w, w * sizeof(float));
    }
  return out;
}

}  // namespace overnet
