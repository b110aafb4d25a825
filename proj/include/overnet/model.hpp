#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "overnet/common.hpp"
#include "overnet/ops.hpp"
#include "overnet/param_store.hpp"
#include "overnet/scale.hpp"

namespace overnet {

enum class HeadKind { PixelShuffle, OsmBilinear, OsmBicubic };

inline HeadKind parse_head(const std::string& s) {
  if (s == "pixelshuffle") return HeadKind::PixelShuffle;
  if (s == "osm_bilinear") return HeadKind::OsmBilinear;
  if (s == "osm_bicubic") return HeadKind::OsmBicubic;
  throw ConfigError("unknown head: " + s);
}

inline const char* head_name(HeadKind h) {
  switch (h) {
    case HeadKind::PixelShuffle: return "pixelshuffle";
    case HeadKind::OsmBilinear: return "osm_bilinear";
    case HeadKind::OsmBicubic: return "osm_bicubic";
  }
  return "?";
}

// Architectural hyperparameters. overscale_factor 0 means "one above
// max_scale", resolved at use so changing max_scale keeps the relation.
struct ModelConfig {
  std::size_t base_channels = 64;
  std::size_t num_ldgs = 3;
  std::size_t rbs_per_ldg = 3;
  std::size_t expansion_ratio = 4;
  double lowrank_ratio = 0.8;
  std::size_t se_reduction = 4;
  std::size_t max_scale = 4;
  std::size_t overscale_factor = 0;
  HeadKind head = HeadKind::OsmBicubic;
  bool sc_in_ldg = true;
  bool sc_in_gdg = true;
  bool direct_scale_head = false;

  std::size_t overscale() const {
    return overscale_factor == 0 ? max_scale + 1 : overscale_factor;
  }
  std::size_t lowrank() const {
    const auto r = std::llround(lowrank_ratio *
                                static_cast<double>(base_channels));
    return r < 1 ? 1 : static_cast<std::size_t>(r);
  }
  std::size_t se_mid() const {
    const std::size_t m = base_channels / se_reduction;
    return m < 1 ? 1 : m;
  }

  void validate() const {
    if (base_channels < 1 || num_ldgs < 1 || rbs_per_ldg < 1 ||
        expansion_ratio < 1 || se_reduction < 1 || max_scale < 1)
      throw ConfigError("model: all counts must be >= 1");
    if (!(lowrank_ratio > 0.0))
      throw ConfigError("model: lowrank_ratio must be positive");
    if (overscale() < max_scale)
      throw ConfigError("model: overscale_factor " +
                        std::to_string(overscale()) +
                        " is below max_scale " + std::to_string(max_scale));
  }
};

// The kitchen-table variant used by the self-tests: small enough to
// finite-difference and to overfit a single image in minutes.
inline ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.base_channels = 16;
  cfg.num_ldgs = 1;
  cfg.rbs_per_ldg = 2;
  return cfg;
}

namespace detail {

template <typename T>
void add_conv(ParamStore<T>& ps, const std::string& name, std::size_t o,
              std::size_t i, std::size_t k) {
  ps.add(name + ".v", o, i, k, k);
  ps.add(name + ".g", o, 1, 1, 1);
  ps.add(name + ".b", o, 1, 1, 1);
}

inline std::size_t conv_params(std::size_t o, std::size_t i, std::size_t k) {
  return o * i * k * k + 2 * o;  // directions + gains + biases
}

}  // namespace detail

// Registers every parameter in its canonical order: stem, groups (blocks
// then merges), group-level merges and fuse, global skip, head.
template <typename T>
void register_params(ParamStore<T>& ps, const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.base_channels;
  const std::size_t W = cfg.expansion_ratio * C;
  const std::size_t L = cfg.lowrank();
  const std::size_t M = cfg.se_mid();
  detail::add_conv(ps, "stem", C, 3, 3);
  for (std::size_t d = 0; d < cfg.num_ldgs; ++d) {
    const std::string g = "ldg" + std::to_string(d);
    for (std::size_t k = 0; k < cfg.rbs_per_ldg; ++k) {
      const std::string rb = g + ".rb" + std::to_string(k);
      detail::add_conv(ps, rb + ".expand", W, C, 1);
      detail::add_conv(ps, rb + ".reduce", L, W, 1);
      detail::add_conv(ps, rb + ".conv3", C, L, 3);
      detail::add_conv(ps, rb + ".se.fc1", M, C, 1);
      detail::add_conv(ps, rb + ".se.fc2", C, M, 1);
      ps.add(rb + ".lambda_o", 1, 1, 1, 1);
      ps.add(rb + ".lambda_i", 1, 1, 1, 1);
    }
    if (cfg.sc_in_ldg)
      for (std::size_t k = 1; k < cfg.rbs_per_ldg; ++k)
        detail::add_conv(ps, g + ".merge" + std::to_string(k), C,
                         (k + 1) * C, 1);
  }
  if (cfg.sc_in_gdg) {
    for (std::size_t d = 1; d < cfg.num_ldgs; ++d)
      detail::add_conv(ps, "gdg.merge" + std::to_string(d), C, (d + 1) * C,
                       1);
    detail::add_conv(ps, "gdg.fuse", C, cfg.num_ldgs * C, 1);
  }
  detail::add_conv(ps, "skip.conv3", C, 3, 3);
  detail::add_conv(ps, "skip.conv1", C, C, 1);
  ps.add("skip.lambda0", 1, 1, 1, 1);
  ps.add("skip.lambda1", 1, 1, 1, 1);
  if (cfg.head == HeadKind::PixelShuffle) {
    detail::add_conv(ps, "head.expand", 3 * cfg.max_scale * cfg.max_scale, C,
                     3);
  } else {
    const std::size_t q = cfg.overscale();
    detail::add_conv(ps, "head.expand", 3 * q * q, C, 3);
    detail::add_conv(ps, "head.refine", 3, 3, 3);
  }
}

// Closed-form parameter count; must equal enumerating a registered store.
inline std::size_t param_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.base_channels;
  const std::size_t W = cfg.expansion_ratio * C;
  const std::size_t L = cfg.lowrank();
  const std::size_t M = cfg.se_mid();
  const std::size_t D = cfg.num_ldgs, R = cfg.rbs_per_ldg;
  using detail::conv_params;
  std::size_t total = conv_params(C, 3, 3);
  const std::size_t per_block = conv_params(W, C, 1) + conv_params(L, W, 1) +
                                conv_params(C, L, 3) + conv_params(M, C, 1) +
                                conv_params(C, M, 1) + 2;
  total += D * R * per_block;
  if (cfg.sc_in_ldg)
    for (std::size_t k = 1; k < R; ++k)
      total += D * conv_params(C, (k + 1) * C, 1);
  if (cfg.sc_in_gdg) {
    for (std::size_t d = 1; d < D; ++d) total += conv_params(C, (d + 1) * C, 1);
    total += conv_params(C, D * C, 1);
  }
  total += conv_params(C, 3, 3) + conv_params(C, C, 1) + 2;
  if (cfg.head == HeadKind::PixelShuffle) {
    total += conv_params(3 * cfg.max_scale * cfg.max_scale, C, 3);
  } else {
    const std::size_t q = cfg.overscale();
    total += conv_params(3 * q * q, C, 3) + conv_params(3, 3, 3);
  }
  return total;
}

namespace detail {

template <typename T>
Value<T> model_conv(ParamStore<T>& ps, const std::string& name,
                    const Value<T>& x) {
  auto w = weight_norm(ps.leaf(name + ".v"), ps.leaf(name + ".g"));
  return conv2d(x, w, ps.leaf(name + ".b"));
}

// Wide-activation low-rank body, squeeze-excitation, two scalar gates.
template <typename T>
Value<T> residual_block(ParamStore<T>& ps, const std::string& p,
                        const Value<T>& x) {
  auto wa = model_conv(
      ps, p + ".conv3",
      model_conv(ps, p + ".reduce",
                 relu(model_conv(ps, p + ".expand", x))));
  auto s = sigmoid(model_conv(
      ps, p + ".se.fc2",
      relu(model_conv(ps, p + ".se.fc1", global_avg_pool(wa)))));
  auto gated = mul_channels(wa, s);
  return add(scale_gate(gated, ps.leaf(p + ".lambda_o")),
                  scale_gate(x, ps.leaf(p + ".lambda_i")));
}

// Block chain with dense 1x1 merges ahead of every block after the first.
template <typename T>
Value<T> local_group(ParamStore<T>& ps, const ModelConfig& cfg, std::size_t d,
                     const Value<T>& x) {
  const std::string g = "ldg" + std::to_string(d);
  std::vector<Value<T>> outs;
  for (std::size_t k = 0; k < cfg.rbs_per_ldg; ++k) {
    Value<T> in;
    if (k == 0) {
      in = x;
    } else if (cfg.sc_in_ldg) {
      std::vector<Value<T>> cat{x};
      cat.insert(cat.end(), outs.begin(), outs.end());
      in = model_conv(ps, g + ".merge" + std::to_string(k),
                      concat_channels(cat));
    } else {
      in = outs.back();
    }
    outs.push_back(residual_block(ps, g + ".rb" + std::to_string(k), in));
  }
  return outs.back();
}

}  // namespace detail

template <typename T>
struct ForwardResult {
  Value<T> canonical;               // at x max_scale
  std::vector<Value<T>> per_scale;  // one per requested scale, same order
};

// Builds the differentiable forward graph for one LR batch. Requested
// scales become resized views of the canonical map (or, with
// direct_scale_head, fresh interpolations of the overscaled map).
template <typename T>
ForwardResult<T> overnet_forward(ParamStore<T>& ps, const ModelConfig& cfg,
                                 const Tensor4<T>& lr,
                                 const std::vector<Rational>& scales = {}) {
  cfg.validate();
  if (lr.c != 3)
    throw UsageError("forward: expected a 3-channel input, got " +
                     std::to_string(lr.c));
  const std::size_t N = cfg.max_scale;
  for (const auto& s : scales)
    if (Rational(static_cast<std::int64_t>(N), 1) < s)
      throw ScaleError("forward: scale " + s.str() +
                       " exceeds the model maximum " + std::to_string(N));

  auto input = make_leaf<T>(lr);
  auto f0 = detail::model_conv(ps, "stem", input);
  std::vector<Value<T>> louts;
  for (std::size_t d = 0; d < cfg.num_ldgs; ++d) {
    Value<T> in;
    if (d == 0) {
      in = f0;
    } else if (cfg.sc_in_gdg) {
      std::vector<Value<T>> cat{f0};
      cat.insert(cat.end(), louts.begin(), louts.end());
      in = detail::model_conv(ps, "gdg.merge" + std::to_string(d),
                              concat_channels(cat));
    } else {
      in = louts.back();
    }
    louts.push_back(detail::local_group(ps, cfg, d, in));
  }
  Value<T> fd = cfg.sc_in_gdg
                    ? detail::model_conv(ps, "gdg.fuse",
                                         concat_channels(louts))
                    : louts.back();

  auto pooled =
      global_avg_pool(detail::model_conv(ps, "skip.conv3", input));
  auto vec = relu(detail::model_conv(ps, "skip.conv1", pooled));
  auto h = add_channels(scale_gate(fd, ps.leaf("skip.lambda0")),
                             scale_gate(vec, ps.leaf("skip.lambda1")));

  const std::size_t H = lr.h, W = lr.w;
  auto upscale_lr = [&](std::size_t oh, std::size_t ow) {
    return resize_value(input, oh, ow, ResampleKernel::Cubic);
  };

  ForwardResult<T> result;
  Value<T> refined;  // overscaled 3-channel map, OSM heads only
  ResampleKernel down_kernel = cfg.head == HeadKind::OsmBilinear
                                   ? ResampleKernel::Linear
                                   : ResampleKernel::Cubic;
  if (cfg.head == HeadKind::PixelShuffle) {
    auto t = detail::model_conv(ps, "head.expand", h);
    result.canonical =
        add(pixel_shuffle(t, N), upscale_lr(N * H, N * W));
  } else {
    const std::size_t q = cfg.overscale();
    auto over = pixel_shuffle(detail::model_conv(ps, "head.expand", h), q);
    refined = detail::model_conv(ps, "head.refine", over);
    result.canonical =
        add(resize_value(refined, N * H, N * W, down_kernel),
                 upscale_lr(N * H, N * W));
  }

  for (const auto& s : scales) {
    const std::size_t oh = s.scale_up(H), ow = s.scale_up(W);
    if (cfg.direct_scale_head && refined) {
      result.per_scale.push_back(
          add(resize_value(refined, oh, ow, down_kernel),
                   upscale_lr(oh, ow)));
    } else {
      result.per_scale.push_back(resize_value(result.canonical, oh, ow,
                                                   ResampleKernel::Cubic));
    }
  }
  return result;
}

// Inference wrapper: forward at one scale, clamp to the image range.
inline Tensor4f predict(ParamStore<float>& ps, const ModelConfig& cfg,
                        const Tensor4f& lr, const Rational& s) {
  auto r = overnet_forward(ps, cfg, lr, {s});
  Tensor4f out = r.per_scale[0]->val;
  for (float& v : out.data) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return out;
}

// key=value rendering embedded in checkpoints; resolved values only.
inline std::string model_config_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "base_channels = " << cfg.base_channels << "\n"
     << "num_ldgs = " << cfg.num_ldgs << "\n"
     << "rbs_per_ldg = " << cfg.rbs_per_ldg << "\n"
     << "expansion_ratio = " << cfg.expansion_ratio << "\n"
     << "lowrank_ratio = " << cfg.lowrank_ratio << "\n"
     << "se_reduction = " << cfg.se_reduction << "\n"
     << "max_scale = " << cfg.max_scale << "\n"
     << "overscale_factor = " << cfg.overscale() << "\n"
     << "head = " << head_name(cfg.head) << "\n"
     << "sc_in_ldg = " << (cfg.sc_in_ldg ? 1 : 0) << "\n"
     << "sc_in_gdg = " << (cfg.sc_in_gdg ? 1 : 0) << "\n"
     << "direct_scale_head = " << (cfg.direct_scale_head ? 1 : 0) << "\n";
  return os.str();
}

namespace detail {

inline std::size_t parse_count(const std::string& v, const std::string& key) {
  try {
    const long long n = std::stoll(v);
    if (n < 0) throw ConfigError(key + ": must be non-negative");
    return static_cast<std::size_t>(n);
  } catch (const std::invalid_argument&) {
    throw ConfigError(key + ": not an integer: " + v);
  } catch (const std::out_of_range&) {
    throw ConfigError(key + ": out of range: " + v);
  }
}

inline double parse_real(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw ConfigError(key + ": not a number: " + v);
    return d;
  } catch (const std::invalid_argument&) {
    throw ConfigError(key + ": not a number: " + v);
  } catch (const std::out_of_range&) {
    throw ConfigError(key + ": out of range: " + v);
  }
}

inline bool parse_flag(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError(key + ": not a boolean: " + v);
}

}  // namespace detail

// Applies one key to a config; shared by file parsing and checkpoints.
inline bool apply_model_key(ModelConfig& cfg, const std::string& key,
                            const std::string& val) {
  using detail::parse_count;
  using detail::parse_flag;
  using detail::parse_real;
  if (key == "base_channels") cfg.base_channels = parse_count(val, key);
  else if (key == "num_ldgs") cfg.num_ldgs = parse_count(val, key);
  else if (key == "rbs_per_ldg") cfg.rbs_per_ldg = parse_count(val, key);
  else if (key == "expansion_ratio") cfg.expansion_ratio = parse_count(val, key);
  else if (key == "lowrank_ratio") cfg.lowrank_ratio = parse_real(val, key);
  else if (key == "se_reduction") cfg.se_reduction = parse_count(val, key);
  else if (key == "max_scale") cfg.max_scale = parse_count(val, key);
  else if (key == "overscale_factor") cfg.overscale_factor = parse_count(val, key);
  else if (key == "head") cfg.head = parse_head(val);
  else if (key == "sc_in_ldg") cfg.sc_in_ldg = parse_flag(val, key);
  else if (key == "sc_in_gdg") cfg.sc_in_gdg = parse_flag(val, key);
  else if (key == "direct_scale_head") cfg.direct_scale_head = parse_flag(val, key);
  else return false;
  return true;
}

inline ModelConfig parse_model_config_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto kv = detail::parse_kv_line(line);
    if (!kv) continue;
    if (!apply_model_key(cfg, kv->first, kv->second))
      throw ConfigError("unknown model key: " + kv->first);
  }
  cfg.validate();
  return cfg;
}

}  // namespace overnet
