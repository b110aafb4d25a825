#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "overnet/common.hpp"
#include "overnet/degrade.hpp"
#include "overnet/model.hpp"
#include "overnet/scale.hpp"

namespace overnet {

struct TrainConfig {
  double lr0 = 1e-3;
  std::uint64_t halve_every = 2000;
  std::size_t batch_size = 8;
  std::size_t patch = 64;
  std::uint64_t total_iters = 2000;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;  // 0 = write only the final checkpoint
  ScaleSet scale_set = ScaleSet::parse("2,3,4");
  Degradation degradation;  // scale field is overridden by model.max_scale
  ModelConfig model;

  void validate() const {
    if (!(lr0 > 0.0)) throw ConfigError("lr0: must be positive");
    if (halve_every == 0) throw ConfigError("halve_every: must be positive");
    if (batch_size == 0) throw ConfigError("batch_size: must be positive");
    if (patch == 0) throw ConfigError("patch: must be positive");
    model.validate();
    if (Rational(static_cast<std::int64_t>(model.max_scale), 1) <
        scale_set.max())
      throw ConfigError("scale_set: scale " + scale_set.max().str() +
                        " exceeds max_scale " +
                        std::to_string(model.max_scale));
  }

  // Degradation as actually applied in training: downsample by the
  // model's full factor.
  Degradation train_degradation() const {
    Degradation d = degradation;
    d.scale = Rational(static_cast<std::int64_t>(model.max_scale), 1);
    return d;
  }
};

// Paper-protocol schedule and batch; everything else already matches.
inline void apply_paper_scale(TrainConfig& cfg) {
  cfg.halve_every = 200000;
  cfg.batch_size = 64;
}

namespace detail {

inline std::string real_str(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

// Canonical key=value rendering; parse_train_config_text inverts it.
inline std::string train_config_text(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "lr0 = " << detail::real_str(cfg.lr0) << "\n"
     << "halve_every = " << cfg.halve_every << "\n"
     << "batch_size = " << cfg.batch_size << "\n"
     << "patch = " << cfg.patch << "\n"
     << "total_iters = " << cfg.total_iters << "\n"
     << "seed = " << cfg.seed << "\n"
     << "checkpoint_every = " << cfg.checkpoint_every << "\n"
     << "scale_set = " << cfg.scale_set.str() << "\n"
     << "degradation = " << degrade_kind_name(cfg.degradation.kind) << "\n"
     << "blur_sigma = " << detail::real_str(cfg.degradation.blur_sigma)
     << "\n"
     << "kernel_size = " << cfg.degradation.kernel_size << "\n"
     << "noise_level = " << detail::real_str(cfg.degradation.noise_level)
     << "\n"
     << "blur_first = " << (cfg.degradation.blur_first ? 1 : 0) << "\n";
  std::istringstream model_lines(model_config_text(cfg.model));
  std::string line;
  while (std::getline(model_lines, line)) os << "model." << line << "\n";
  return os.str();
}

// Applies one key; false when the key is not a training key (model.*
// keys are routed to the model config).
inline bool apply_train_key(TrainConfig& cfg, const std::string& key,
                            const std::string& val) {
  using detail::parse_count;
  using detail::parse_flag;
  using detail::parse_real;
  if (key.rfind("model.", 0) == 0) {
    if (!apply_model_key(cfg.model, key.substr(6), val))
      throw ConfigError("unknown config key: " + key);
    return true;
  }
  if (key == "lr0") cfg.lr0 = parse_real(val, key);
  else if (key == "halve_every") cfg.halve_every = parse_count(val, key);
  else if (key == "batch_size") cfg.batch_size = parse_count(val, key);
  else if (key == "patch") cfg.patch = parse_count(val, key);
  else if (key == "total_iters") cfg.total_iters = parse_count(val, key);
  else if (key == "seed") cfg.seed = parse_count(val, key);
  else if (key == "checkpoint_every")
    cfg.checkpoint_every = parse_count(val, key);
  else if (key == "scale_set") cfg.scale_set = ScaleSet::parse(val);
  else if (key == "degradation")
    cfg.degradation.kind = parse_degrade_kind(val);
  else if (key == "blur_sigma")
    cfg.degradation.blur_sigma = parse_real(val, key);
  else if (key == "kernel_size")
    cfg.degradation.kernel_size = parse_count(val, key);
  else if (key == "noise_level")
    cfg.degradation.noise_level = parse_real(val, key);
  else if (key == "blur_first")
    cfg.degradation.blur_first = parse_flag(val, key);
  else return false;
  return true;
}

inline TrainConfig parse_train_config_text(const std::string& text,
                                           TrainConfig cfg = {}) {
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto kv = detail::parse_kv_line(line);
    if (!kv) continue;
    if (!seen.insert(kv->first).second)
      throw ConfigError("duplicate config key: " + kv->first);
    if (!apply_train_key(cfg, kv->first, kv->second))
      throw ConfigError("unknown config key: " + kv->first);
  }
  cfg.validate();
  return cfg;
}

inline TrainConfig load_train_config(const std::string& path,
                                     TrainConfig base = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config file not found: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_train_config_text(ss.str(), std::move(base));
}

}  // namespace overnet
